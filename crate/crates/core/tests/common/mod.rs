#![allow(dead_code)]

use kernelctrl::SimplexLP;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::process::Command;

pub const BIN: &str = env!("CARGO_BIN_EXE_kernelctrl");

pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs the binary with a single worker thread.
pub fn run(args: &[&str]) -> Outcome {
    let out = Command::new(BIN)
        .args(args)
        .env("KERNELCTRL_THREADS", "1")
        .output()
        .expect("binary runs");
    Outcome {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}

/// A shipped scenario with textual edits applied, written into `dir`.
pub fn scenario(dir: &Path, name: &str, edits: &[(&str, &str)]) -> PathBuf {
    let mut text = std::fs::read_to_string(scenario_path(name)).expect("scenario exists");
    for (from, to) in edits {
        assert!(text.contains(from), "`{from}` not in {name}");
        text = text.replacen(from, to, 1);
    }
    let p = dir.join(format!("{name}.toml"));
    std::fs::write(&p, text).expect("temp dir is writable");
    p
}

/// Reads a CSV into its header and numeric rows; blank cells become NaN.
pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut lines = text.lines();
    let header = lines.next().expect("header").split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    (header, rows)
}

/// `key,value` summary files as a lookup.
pub fn summary_value(path: &Path, key: &str) -> f64 {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")))
        .unwrap_or_else(|| panic!("{key} missing from {}", path.display()))
        .parse()
        .expect("numeric value")
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Minimum over every basic feasible point: `P - 1` of the inequalities
/// `g_j >= 0` and `D_i g <= 0` held tight together with `sum g = 1`.
pub fn brute_force(lp: &SimplexLP) -> Option<f64> {
    let p = lp.num_vars();
    let d = lp.constraints();
    let mut rows: Vec<Vec<f64>> = (0..p)
        .map(|j| (0..p).map(|k| if k == j { 1.0 } else { 0.0 }).collect())
        .collect();
    rows.extend(d.iter().cloned());
    let mut best: Option<f64> = None;
    for active in combinations(rows.len(), p - 1) {
        let mut a = DMatrix::zeros(p, p);
        let mut b = DVector::zeros(p);
        for k in 0..p {
            a[(0, k)] = 1.0;
        }
        b[0] = 1.0;
        for (r, &i) in active.iter().enumerate() {
            for k in 0..p {
                a[(r + 1, k)] = rows[i][k];
            }
        }
        let Some(g) = a.lu().solve(&b) else { continue };
        let g: Vec<f64> = g.iter().copied().collect();
        if g.iter().any(|v| !v.is_finite() || *v < -1e-9) {
            continue;
        }
        if lp.constraint_values(&g).iter().any(|v| *v > 1e-9) {
            continue;
        }
        let obj: f64 = g.iter().zip(lp.objective()).map(|(a, b)| a * b).sum();
        best = Some(best.map_or(obj, |v: f64| v.min(obj)));
    }
    best
}

pub fn random_lp(rng: &mut ChaCha8Rng, integer: bool) -> SimplexLP {
    let p = rng.random_range(1..=6);
    let m = rng.random_range(0..=3);
    let draw = |rng: &mut ChaCha8Rng| {
        if integer {
            rng.random_range(-2..=2) as f64
        } else {
            rng.random_range(-1.0..1.0)
        }
    };
    let c = (0..p).map(|_| draw(rng)).collect();
    let d = (0..m).map(|_| (0..p).map(|_| draw(rng)).collect()).collect();
    SimplexLP::new(c, d).unwrap()
}
