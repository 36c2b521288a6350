use std::path::PathBuf;
use std::process::{Command, Output};

use g3m_core::dynamic::discrete_payoff;
use g3m_core::market::{MarketParams, PathGrid, PathSimulator};
use g3m_core::pool::PriceVector;
use g3m_core::schedule::WeightSchedule;

fn g3m(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_g3m"))
        .args(args)
        .output()
        .expect("g3m runs")
}

fn config(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn temp_config(name: &str, body: &str) -> String {
    let dir = std::env::temp_dir().join(format!("g3m-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap_or_else(|_| panic!("not a number: {s}"))
}

#[test]
fn empty_scenario_list_prints_header_only() {
    let cfg = temp_config("empty.toml", "seed = 1\n");
    let out = stdout(&g3m(&["price", "--config", &cfg]));
    assert_eq!(
        out,
        "experiment,closed_form,mc_mean,mc_stderr,z_score,g0,eta,arb_profit\n"
    );
}

#[test]
fn unknown_key_exits_with_validation_code() {
    let cfg = temp_config("typo.toml", "[mc]\npath = 10\n");
    let o = g3m(&["price", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("path"));
}

#[test]
fn missing_config_and_bad_flags_are_validation_errors() {
    assert_eq!(g3m(&["price"]).status.code(), Some(2));
    let o = g3m(&["price", "--config", &config("intro.example.toml"), "--clamp-weights"]);
    assert_eq!(o.status.code(), Some(2));
    let o = g3m(&["figure", "eta", "--workers", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn naked_call_is_refused_as_numerical() {
    let o = g3m(&["replicate", "--config", &config("naked-call.toml")]);
    assert_eq!(o.status.code(), Some(3));
    assert!(o.stdout.is_empty());
}

#[test]
fn clamped_naked_call_runs() {
    let out = stdout(&g3m(&[
        "replicate",
        "--config",
        &config("naked-call.toml"),
        "--clamp-weights",
    ]));
    let r = rows(&out);
    assert_eq!(r[0], ["path", "max_abs_error", "max_rel_error", "terminal_gap"]);
    assert_eq!(r.len(), 1 + 20 + 3);
}

#[test]
fn forward_replicates_exactly() {
    let out = stdout(&g3m(&["replicate", "--config", &config("forward.toml")]));
    let r = rows(&out);
    assert_eq!(r.len(), 1 + 50 + 3);
    for row in &r[1..] {
        for cell in &row[1..] {
            assert!(num(cell).abs() < 1e-9, "{row:?}");
        }
    }
}

#[test]
fn intro_price_row() {
    let out = stdout(&g3m(&["price", "--config", &config("intro.example.toml")]));
    let r = rows(&out);
    assert_eq!(r.len(), 2);
    assert_eq!(r[1][0], "intro");
    assert!((num(&r[1][5]) - 18.898815748423097).abs() < 1e-9);
    assert!((num(&r[1][7]) - 1.1012).abs() < 5e-4);
    let closed = num(&r[1][1]);
    assert!((closed - num(&r[1][5]) * num(&r[1][6]).exp()).abs() < 1e-12 * closed);
}

#[test]
fn constant_schedule_keeps_invariant() {
    let out = stdout(&g3m(&["simulate", "--config", &config("simulate-constant.toml")]));
    let r = rows(&out);
    assert_eq!(r[0], ["time", "w_0", "w_1", "r_0", "r_1", "V", "G"]);
    assert_eq!(r.len(), 1 + 3);
    let v0 = num(&r[1][5]);
    for row in &r[1..] {
        assert!((num(&row[5]) - v0).abs() < 1e-12 * v0);
    }
}

#[test]
fn linear_schedule_terminal_value_matches_library() {
    let out = stdout(&g3m(&["simulate", "--config", &config("simulate-linear.toml")]));
    let r = rows(&out);
    assert_eq!(r.len(), 1 + 51);
    let params = MarketParams::independent(0.0, vec![0.3, 0.2]).unwrap();
    let s0 = PriceVector::new(vec![1.0, 2.0]).unwrap();
    let grid = PathGrid::new(0.0, 1.0, 50).unwrap();
    let path = PathSimulator::new(&params, &s0, grid, 7).unwrap().path(0, false);
    let schedule = WeightSchedule::linear(vec![0.8, 0.2], vec![0.2, 0.8], 0.0, 1.0).unwrap();
    let v0 = num(&r[1][5]);
    let want = discrete_payoff(v0, 10.0, &schedule, &path).unwrap();
    let got = num(&r[51][6]);
    assert!((got - want).abs() < 1e-10 * want, "{got} vs {want}");
}

#[test]
fn csv_numbers_round_trip() {
    let out = stdout(&g3m(&["simulate", "--config", &config("simulate-linear.toml")]));
    for row in &rows(&out)[1..] {
        for cell in row {
            let x = num(cell);
            assert_eq!(format!("{x}"), *cell);
        }
    }
}

#[test]
fn out_flag_writes_file() {
    let path = std::env::temp_dir().join(format!("g3m-out-{}.csv", std::process::id()));
    let p = path.to_string_lossy().into_owned();
    let o = g3m(&["figure", "eta", "--out", &p]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, stdout(&g3m(&["figure", "eta"])));
    std::fs::remove_file(path).unwrap();
}

#[test]
fn weight_figure_is_one_half_at_the_money() {
    let out = stdout(&g3m(&["figure", "weights"]));
    let r = rows(&out);
    assert_eq!(r[0], ["x", "tau", "weight"]);
    let atm: Vec<_> = r[1..].iter().filter(|row| num(&row[0]) == 100.0).collect();
    assert_eq!(atm.len(), 4);
    for row in atm {
        assert!((num(&row[2]) - 0.5).abs() < 1e-12);
    }
}

#[test]
fn eta_figure_vanishes_at_pure_pools() {
    let out = stdout(&g3m(&["figure", "eta"]));
    let r = rows(&out);
    assert_eq!(r[0], ["w_a", "rho", "eta"]);
    for row in &r[1..] {
        let w = num(&row[0]);
        if w == 0.0 || w == 1.0 {
            assert_eq!(num(&row[2]), 0.0);
        } else {
            assert!(num(&row[2]) <= 0.0 || num(&row[1]) < 0.0);
        }
    }
}

#[test]
fn figure_grid_override() {
    let cfg = temp_config(
        "fig.toml",
        "[figure]\nw_grid = [0.5]\nrho_grid = [0.0]\nsigma_a = 0.3\nsigma_b = 0.2\n",
    );
    let out = stdout(&g3m(&["figure", "eta", "--config", &cfg]));
    let r = rows(&out);
    assert_eq!(r.len(), 2);
    assert!((num(&r[1][2]) + 0.01625).abs() < 1e-15);
}
