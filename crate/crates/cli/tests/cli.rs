use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use thinobs_cli::figures;
use thinobs_cli::record::{Kind, ResultRecord};
use thinobs_cli::table::Table;

fn thinobs(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thinobs"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("THINOBS_CACHE_DIR")
        .env_remove("SOURCE_DATE_EPOCH")
        .output()
        .expect("binary runs")
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "exit {:?}: {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stderr)
    );
}

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

#[test]
fn legendre_mu_one_is_sine() {
    let d = tmp();
    ok(&thinobs(&["legendre", "--mu", "1", "--n", "3"], d.path()));
    let t = Table::read(&d.path().join("legendre.csv")).unwrap();
    let (phi, p) = (t.floats("phi").unwrap(), t.floats("p").unwrap());
    for (a, b) in phi.iter().zip(&p) {
        assert!((a.sin() - b).abs() < 1e-8, "phi {a}");
    }
}

#[test]
fn legendre_integer_profiles_hit_one_at_pole() {
    let d = tmp();
    ok(&thinobs(&["legendre", "--mu", "7,8"], d.path()));
    let t = Table::read(&d.path().join("legendre.csv")).unwrap();
    let (mu, phi, p) = (t.floats("mu").unwrap(), t.floats("phi").unwrap(), t.floats("p").unwrap());
    for i in 0..mu.len() {
        if (phi[i] - std::f64::consts::FRAC_PI_2).abs() < 1e-15 {
            assert!((p[i] - 1.0).abs() < 1e-8);
        }
    }
    let svg = std::fs::read_to_string(d.path().join("legendre.svg")).unwrap();
    assert!(svg.contains("mu = 7") && svg.contains("mu = 8"));
    let rec = ResultRecord::read(&d.path().join("legendre.json")).unwrap();
    assert_eq!(rec.kind, Kind::Legendre);
}

#[test]
fn usage_errors_exit_two() {
    let d = tmp();
    assert_eq!(thinobs(&["legendre"], d.path()).status.code(), Some(2));
    assert_eq!(thinobs(&["solve", "--sigma", "0.3"], d.path()).status.code(), Some(2));
    assert_eq!(
        thinobs(&["scan", "--m", "3", "--resolution", "8", "8"], d.path()).status.code(),
        Some(2)
    );
    assert_eq!(thinobs(&["gaps", "--tol", "-1"], d.path()).status.code(), Some(2));
    assert_eq!(thinobs(&["gaps", "--bogus"], d.path()).status.code(), Some(2));
    assert_eq!(thinobs(&["variant", "--m", "4"], d.path()).status.code(), Some(2));
}

#[test]
fn empty_slit_heatmap_is_closed_form() {
    let d = tmp();
    ok(&thinobs(&["solve", "--m", "3", "--sigma", "0", "--resolution", "65", "65"], d.path()));
    let t = Table::read(&d.path().join("v_grid.csv")).unwrap();
    let (x, phi, v) = (t.floats("x").unwrap(), t.floats("phi").unwrap(), t.floats("value").unwrap());
    let err = (0..v.len())
        .map(|i| (v[i] - phi[i].cos().powi(3) * x[i].sin()).abs())
        .fold(0.0, f64::max);
    assert!(err < 5e-3, "max error {err}");
    for f in ["bundle.json", "equator.csv", "u_grid.csv", "h.csv", "v.svg", "u.svg", "h.svg"] {
        assert!(d.path().join(f).exists(), "{f}");
    }
}

#[test]
fn pole_behavior_flips_across_the_root() {
    let last_h = |sigma: &str| {
        let d = tmp();
        ok(&thinobs(&["solve", "--m", "3", "--sigma", sigma, "--resolution", "65", "65"], d.path()));
        *Table::read(&d.path().join("h.csv")).unwrap().floats("h").unwrap().last().unwrap()
    };
    let (a, b) = (last_h("0.2"), last_h("0.6"));
    assert!(a * b < 0.0, "h near the pole: {a}, {b}");
}

#[test]
fn bisect_contact_sectors_and_determinism() {
    let d = tmp();
    let cache = d.path().join("cache");
    let args = |out: &str| {
        vec![
            "bisect".to_string(),
            "--m".into(),
            "3".into(),
            "--resolution".into(),
            "49".into(),
            "49".into(),
            "--levels".into(),
            "2".into(),
            "--cache".into(),
            cache.display().to_string(),
            "--jobs".into(),
            "2".into(),
            "--out".into(),
            d.path().join(out).display().to_string(),
        ]
    };
    let run = |out: &str| {
        Command::new(env!("CARGO_BIN_EXE_thinobs"))
            .args(args(out))
            .env_remove("SOURCE_DATE_EPOCH")
            .output()
            .unwrap()
    };
    ok(&run("a"));
    let cached = std::fs::read_dir(&cache).unwrap().count();
    assert!(cached > 0);
    ok(&run("b"));
    assert_eq!(std::fs::read_dir(&cache).unwrap().count(), cached);
    for f in ["root.json", "scan.csv", "contact.csv"] {
        let a = std::fs::read(d.path().join("a").join(f)).unwrap();
        let b = std::fs::read(d.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
    let svg = std::fs::read_to_string(d.path().join("a/contact.svg")).unwrap();
    assert_eq!(svg.matches("<polygon").count(), 6);
    let rec = ResultRecord::read(&d.path().join("a/root.json")).unwrap();
    assert_eq!(rec.kind, Kind::Root);
    assert_eq!(rec.provenance.resolution_chain, vec![(49, 49), (97, 97)]);
}

#[test]
fn contact_set_for_m15_has_thirty_sectors() {
    let d = tmp();
    ok(&thinobs(&["bisect", "--m", "15", "--resolution", "65", "65", "--levels", "1"], d.path()));
    let svg = std::fs::read_to_string(d.path().join("contact.svg")).unwrap();
    assert_eq!(svg.matches("<polygon").count(), 30);
}

#[test]
fn even_m_has_no_root_and_exits_one() {
    let d = tmp();
    let o = thinobs(&["bisect", "--m", "4", "--resolution", "33", "33"], d.path());
    assert_eq!(o.status.code(), Some(1));
    let rec = ResultRecord::read(&d.path().join("root.json")).unwrap();
    assert_eq!(rec.payload["roots"].as_array().unwrap().len(), 0);
}

#[test]
fn gap_sweep_verdict() {
    let d = tmp();
    ok(&thinobs(&["gaps", "--n", "3", "--k-max", "9", "--samples", "33"], d.path()));
    let rec = ResultRecord::read(&d.path().join("gaps.json")).unwrap();
    assert_eq!(rec.payload[0]["verdict"], serde_json::Value::Bool(true));
    let t = Table::read(&d.path().join("gaps_n3.csv")).unwrap();
    assert_eq!(t.rows.len(), 10);
    assert!(t.floats("min_product").unwrap().iter().all(|&p| p > 0.0));
}

#[test]
fn config_file_and_flag_precedence() {
    let d = tmp();
    let cfg = d.path().join("run.toml");
    std::fs::write(&cfg, "mu = [2.5, 3.5]\npoints = 11\nn = 4\n").unwrap();
    let cfgs = cfg.display().to_string();
    ok(&thinobs(&["legendre", "--config", &cfgs, "--points", "5"], d.path()));
    let t = Table::read(&d.path().join("legendre.csv")).unwrap();
    assert_eq!(t.rows.len(), 10);
    let rec = ResultRecord::read(&d.path().join("legendre.json")).unwrap();
    assert_eq!(rec.payload[0]["n"], 4);
}

#[test]
fn cache_directory_from_environment() {
    let d = tmp();
    let cache: PathBuf = d.path().join("envcache");
    let o = Command::new(env!("CARGO_BIN_EXE_thinobs"))
        .args(["scan", "--m", "3", "--resolution", "33", "33", "--points", "3", "--out"])
        .arg(d.path().join("o"))
        .env("THINOBS_CACHE_DIR", &cache)
        .output()
        .unwrap();
    ok(&o);
    assert_eq!(std::fs::read_dir(&cache).unwrap().count(), 3);
}

#[test]
fn variant_root_in_window() {
    let d = tmp();
    ok(&thinobs(
        &["variant", "--m", "5", "--k", "2", "--resolution", "49", "49", "--levels", "1"],
        d.path(),
    ));
    let rec = ResultRecord::read(&d.path().join("variant.json")).unwrap();
    let mu = rec.payload["root"]["extrapolated_mu"].as_f64().unwrap();
    assert!(mu > 7.0 && mu < 8.0, "mu {mu}");
}

#[test]
fn figures_regenerate_from_csv() {
    let d = tmp();
    ok(&thinobs(&["solve", "--m", "3", "--sigma", "0.42", "--resolution", "49", "49"], d.path()));
    ok(&thinobs(&["legendre", "--mu", "3.5,4.5"], d.path()));
    let p = |f: &str| d.path().join(f);
    let again = p("again.svg");
    figures::wedge_heatmap(&p("u_grid.csv"), &again, 3, "u").unwrap();
    assert_eq!(std::fs::read(&again).unwrap(), std::fs::read(p("u.svg")).unwrap());
    figures::profile(&p("h.csv"), &again, "h, m = 3, sigma = 0.4167").unwrap();
    assert_eq!(std::fs::read(&again).unwrap(), std::fs::read(p("h.svg")).unwrap());
    figures::legendre_overlay(&p("legendre.csv"), &again).unwrap();
    assert_eq!(std::fs::read(&again).unwrap(), std::fs::read(p("legendre.svg")).unwrap());
}

#[test]
fn timestamp_comes_from_source_date_epoch() {
    let d = tmp();
    let o = Command::new(env!("CARGO_BIN_EXE_thinobs"))
        .args(["legendre", "--mu", "2", "--out"])
        .arg(d.path())
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .unwrap();
    ok(&o);
    let rec = ResultRecord::read(&d.path().join("legendre.json")).unwrap();
    assert_eq!(rec.provenance.timestamp, Some(1_700_000_000));
}
