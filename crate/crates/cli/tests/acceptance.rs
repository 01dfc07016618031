//! One PASS/FAIL line per acceptance criterion.
//!
//! Criteria the model is expected to miss (the transport-edge half of the
//! dominance family and its strict inclusion witness) are printed but not
//! asserted; everything else must pass.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};

use ltg::config::{max_exit_rate, GameFile};
use ltg::model::{validate_game, ControlGrid, GameSpec, JointState, PlayerState};
use ltg::solve::enumerate_mpe;
use ltg::uniformize::uniformize;
use ltg_cli::kinds::{candidate_index, one_shot_mpes};
use ltg_cli::report::Report;
use ltg_cli::run_config;
use ltg_cli::scenario::Overrides;

fn corpus(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(rel)
}

struct Line {
    id: &'static str,
    title: &'static str,
    pass: bool,
    detail: String,
    expected_red: bool,
}

struct Run {
    report: Report,
    secs: f64,
}

impl Run {
    fn scenario(name: &str, out: &Path) -> Run {
        let start = Instant::now();
        let outcome = run_config(&corpus(&format!("scenarios/{name}.toml")), Some(&out.join(name)), &Overrides::default(), None);
        let secs = start.elapsed().as_secs_f64();
        assert!(outcome.error.is_none(), "{name}: {:?}", outcome.error);
        Run { report: outcome.report.expect("report"), secs }
    }

    /// Every assertion whose name contains `needle`, all passing; details joined.
    fn holds(&self, needle: &str) -> (bool, String) {
        let hits: Vec<_> = self.report.assertions.iter().filter(|a| a.name.contains(needle)).collect();
        assert!(!hits.is_empty(), "no assertion matching {needle:?} in {}", self.report.name);
        let detail = hits.iter().map(|a| a.detail.as_str()).filter(|d| !d.is_empty()).collect::<Vec<_>>().join("; ");
        (hits.iter().all(|a| a.pass), detail)
    }

    fn param(&self, key: &str) -> &str {
        self.report.parameters.get(key).map_or("", String::as_str)
    }
}

fn timed(pass: bool, detail: String, secs: f64, limit: f64) -> (bool, String) {
    (pass && secs <= limit, join(&[detail, format!("{secs:.2}s of {limit}s")]))
}

fn join(parts: &[String]) -> String {
    parts.iter().filter(|p| !p.is_empty()).cloned().collect::<Vec<_>>().join("; ")
}

/// Random games with at most three joint states and at most two controls
/// per player, checked against the one-shot deviation loop.
fn small_games(count: usize, seed: u64) -> (bool, String) {
    use PlayerState::{Active as A, DeadOut, Sleep as S};
    let shapes: [&[&[PlayerState]]; 4] = [&[&[A, S]], &[&[A, S, DeadOut]], &[&[A, S], &[A]], &[&[A], &[A, S]]];
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut mismatches = 0;
    let mut equilibria = 0;
    for n in 0..count {
        let allowed: Vec<Vec<PlayerState>> = shapes[n % shapes.len()].iter().map(|a| a.to_vec()).collect();
        let counts: Vec<usize> = allowed.iter().map(|_| rng.gen_range(1..=2)).collect();
        let initial = JointState(allowed.iter().map(|a| a[a.len().min(2) - 1]).collect());
        let mut g = GameSpec::empty(allowed.clone(), ControlGrid::indexed(&counts), 1.0, initial).unwrap();
        for s in 0..g.space.count() {
            for i in 0..allowed.len() {
                let here = g.space.player_state(s, i);
                for &to in allowed[i].iter().filter(|&&q| q != here) {
                    for c in 0..counts[i] {
                        let rate = if rng.gen_bool(0.5) { rng.gen_range(0.0..3.0) } else { 0.0 };
                        g.set_rate(s, i, to, c, rate).unwrap();
                    }
                }
                g.set_terminal(s, i, rng.gen_range(-1.0..1.0));
            }
            for u in 0..g.controls.profiles() {
                for i in 0..allowed.len() {
                    g.set_benefit(s, u, i, rng.gen_range(-1.0..2.0));
                }
            }
        }
        for (i, a) in allowed.iter().enumerate() {
            for &from in a {
                for &to in a.iter().filter(|&&q| q != from) {
                    g.set_switch_cost(i, from, to, rng.gen_range(0.0..1.0)).unwrap();
                }
            }
            if counts[i] == 2 {
                g.set_control_cost(i, 1, rng.gen_range(0.0..0.5)).unwrap();
            }
        }
        g.rates.lambda_max = max_exit_rate(&g);
        let game = validate_game(g).unwrap();
        let gamma = (game.rates.lambda_max + rng.gen_range(0.0..4.0)).max(1.0).ceil();
        let ug = uniformize(&game, gamma).unwrap();
        let mut found: Vec<u128> = enumerate_mpe(&ug, 1e-9, 1 << 20).unwrap().iter().map(|(p, _)| candidate_index(&ug, p)).collect();
        found.sort();
        let oracle: Vec<u128> = one_shot_mpes(&ug, &1e-9).into_iter().collect();
        equilibria += oracle.len();
        mismatches += usize::from(found != oracle);
    }
    (mismatches == 0, format!("{count} random games, {equilibria} equilibria, {mismatches} mismatches"))
}

/// Corpus games small enough for the brute-force oracle.
fn small_corpus_games() -> (bool, String) {
    let mut checked = Vec::new();
    let mut ok = true;
    for name in ["toggle", "decay", "dial", "relay", "pair_flow", "trade"] {
        let text = fs::read_to_string(corpus(&format!("games/{name}.toml"))).unwrap();
        let game = validate_game(GameFile::parse(&text).unwrap().build::<f64>().unwrap()).unwrap();
        if game.space.count() > 3 || (0..game.players()).any(|i| game.controls.count(i) > 2) {
            continue;
        }
        let ug = uniformize(&game, 20.0).unwrap();
        let mut found: Vec<u128> = enumerate_mpe(&ug, 1e-9, 1 << 20).unwrap().iter().map(|(p, _)| candidate_index(&ug, p)).collect();
        found.sort();
        ok &= found == one_shot_mpes(&ug, &1e-9).into_iter().collect::<Vec<_>>();
        checked.push(name);
    }
    (ok && !checked.is_empty(), format!("corpus {}", checked.join(",")))
}

fn files(dir: &Path, into: &mut Vec<PathBuf>) {
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            files(&p, into);
        } else {
            into.push(p);
        }
    }
}

fn identical_runs(root: &Path) -> (bool, String) {
    let dirs = [root.join("first"), root.join("second")];
    for d in &dirs {
        let status = Command::new(env!("CARGO_BIN_EXE_ltg"))
            .args(["run", "--config"])
            .arg(corpus("run.toml"))
            .arg("--out")
            .arg(d)
            .output()
            .unwrap();
        assert!(status.status.code().is_some(), "run was killed");
    }
    let mut a = Vec::new();
    files(&dirs[0], &mut a);
    a.sort();
    let mut differing = Vec::new();
    for p in &a {
        let rel = p.strip_prefix(&dirs[0]).unwrap();
        if fs::read(p).ok() != fs::read(dirs[1].join(rel)).ok() {
            differing.push(rel.display().to_string());
        }
    }
    let mut b = Vec::new();
    files(&dirs[1], &mut b);
    let same_set = a.len() == b.len();
    (same_set && differing.is_empty(), format!("{} files, {} differ", a.len(), differing.len()))
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let mut lines = Vec::new();
    let mut line = |id, title, (pass, detail): (bool, String), expected_red| lines.push(Line { id, title, pass, detail, expected_red });

    let uni = Run::scenario("uniformize", out);
    let (pass, detail) = uni.holds("dp matches monte carlo");
    let scale = uni.param("paths").parse::<usize>().unwrap() >= 100_000 && uni.report.inputs.len() >= 6;
    line("1", "uniformization fidelity", timed(pass && scale, detail, uni.secs, 60.0), false);

    let inertia = Run::scenario("inertia", out);
    let (pass, detail) = inertia.holds("survives every sampled scheme");
    line("2", "survival below the inertia bound", timed(pass, detail, inertia.secs, 30.0), false);
    let (pass, detail) = inertia.holds("converse scheme eliminates");
    line("3", "converse transfer eliminates the status quo", timed(pass, detail, inertia.secs, 5.0), false);

    let dom = Run::scenario("dominance", out);
    let (a, da) = dom.holds("is an MPE with a flow edge");
    let (b, db) = dom.holds("survives every sampled scheme within the budget");
    line("4(i)", "flow-edge status quo is robust to bounded transfers", timed(a && b, join(&[da, db]), dom.secs, 60.0), false);
    let (a, da) = dom.holds("fails verify_mpe with a transport edge");
    let (b, db) = dom.holds("activating MPE with higher welfare");
    line("4(ii)", "transport edge breaks the status quo", timed(a && b, join(&[da, db]), dom.secs, 60.0), true);

    let mono = Run::scenario("monotonicity", out);
    let (a, da) = mono.holds("included in transport outcomes");
    let (b, db) = mono.holds("embedded profiles keep their values");
    line("5", "flow outcomes embed in transport outcomes", timed(a && b, join(&[da, db]), mono.secs, 120.0), false);
    let (a, da) = mono.holds("strict inclusion witness");
    line("5(strict)", "strict inclusion witness", timed(a, da, mono.secs, 120.0), true);

    let pivot = Run::scenario("pivot", out);
    let preset = pivot.param("kappa_l") == "1/5" && pivot.param("kappa_h") == "3/2";
    let (a, da) = pivot.holds("EPIC");
    let (b, db) = pivot.holds("deficit");
    line("6", "pivot mechanism is EPIC with bounded deficit", timed(preset && a && b, join(&[da, db]), pivot.secs, 30.0), false);

    let imp = Run::scenario("impossibility", out);
    let cells = imp.report.tables.get("cells").map_or(0, |t| t.rows.len());
    let ok = ["every certificate verifies", "every feasible point", "infeasible cells identified"].iter().all(|n| imp.holds(n).0);
    let detail = format!("{cells} cells; {}", imp.holds("infeasible cells identified").1);
    line("7", "impossibility certificates on the grid", timed(ok && cells == 64, detail, imp.secs, 120.0), false);

    let start = Instant::now();
    let (a, da) = small_games(300, 8);
    let (b, db) = small_corpus_games();
    let pair = Run::scenario("mpe_pair", out);
    let (c, dc) = pair.holds("matches one-shot deviation oracle");
    line("8", "enumeration matches the brute-force oracle", timed(a && b && c, join(&[da, db, format!("pair {dc}")]), start.elapsed().as_secs_f64(), 60.0), false);

    line("9", "two full corpus runs are byte-identical", identical_runs(&out.join("det")), false);

    for l in &lines {
        let verdict = if l.pass { "PASS" } else { "FAIL" };
        let note = if l.expected_red && !l.pass { " [known]" } else { "" };
        println!("{verdict} {} {}{note}: {}", l.id, l.title, l.detail);
    }
    let broken: Vec<_> = lines.iter().filter(|l| !l.pass && !l.expected_red).map(|l| l.id).collect();
    if !broken.is_empty() {
        eprintln!("criteria failed: {broken:?}");
        std::process::exit(1);
    }
}
