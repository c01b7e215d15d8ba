#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

/// Reference reports: file stem and arguments.
pub const GOLDEN: &[(&str, &[&str])] = &[
    (
        "volume_conv",
        &[
            "volume", "--dim", "2", "--center", "[0,0;0]", "--radius", "0.3",
        ],
    ),
    (
        "volume_ie",
        &[
            "volume",
            "--dim",
            "6",
            "--center",
            "[0.1,0.9,0.4,0.5,0.3,0.7;0]",
            "--radius",
            "0.8",
            "--method",
            "ie",
        ],
    ),
    (
        "volume_mc",
        &[
            "volume",
            "--dim",
            "4",
            "--radius",
            "0.5",
            "--method",
            "mc",
            "--samples",
            "100000",
            "--seed",
            "7",
        ],
    ),
    (
        "volume_quasi",
        &[
            "volume",
            "--dim",
            "4",
            "--radius",
            "0.5",
            "--method",
            "mc",
            "--quasi",
            "--samples",
            "100000",
            "--seed",
            "7",
        ],
    ),
    (
        "ball_measure",
        &[
            "ball-measure",
            "--center",
            "[;0]",
            "--radius",
            "0.3",
            "--tol",
            "5e-4",
        ],
    ),
    (
        "union_measure",
        &[
            "union-measure",
            "--ball",
            "[0.2;0]:0.4",
            "--complement",
            "[;1]:0.5",
        ],
    ),
    (
        "shell_check",
        &[
            "shell-check",
            "--dim",
            "5",
            "--radius",
            "0.5",
            "--eps",
            "1e-3",
        ],
    ),
    (
        "curve_hit",
        &["curve-hit", "--k", "1", "--delta", "0.05", "--alpha", "0.5"],
    ),
    (
        "curve_hit_k2",
        &["curve-hit", "--k", "2", "--delta", "0.02", "--strengthened"],
    ),
    ("indices", &["indices", "--k", "2", "--delta", "0.05"]),
    ("orbit_check", &["orbit-check", "--t1", "0", "--t2", "0.5"]),
    (
        "orbit_pairs",
        &["orbit-check", "--pairs", "200", "--seed", "3"],
    ),
    ("cylinder_demo", &["cylinder-demo", "--k", "5"]),
    (
        "covering_audit",
        &[
            "covering-audit",
            "--family",
            "family.json",
            "--samples",
            "2000",
            "--seed",
            "1",
        ],
    ),
    (
        "shell_grid",
        &[
            "shell-check",
            "--grid",
            "--random-centers",
            "2",
            "--seed",
            "5",
        ],
    ),
];

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("golden")
}

/// Runs the binary from the golden directory with no ambient config.
pub fn mu0(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mu0"))
        .args(args)
        .current_dir(golden_dir())
        .env_remove("MU0_CONFIG")
        .output()
        .expect("binary runs")
}

/// Report text with the timestamp removed; CSV passes through.
pub fn normalize(stdout: &[u8]) -> String {
    let text = String::from_utf8(stdout.to_vec()).expect("utf-8 report");
    match serde_json::from_str::<serde_json::Value>(&text) {
        Ok(mut v) => {
            if let Some(obj) = v.as_object_mut() {
                obj.remove("timestamp");
            }
            let mut s = serde_json::to_string_pretty(&v).unwrap();
            s.push('\n');
            s
        }
        Err(_) => text,
    }
}

pub fn golden_path(name: &str, normalized: &str) -> PathBuf {
    let ext = if normalized.starts_with('{') {
        "json"
    } else {
        "csv"
    };
    golden_dir().join(format!("{name}.{ext}"))
}

/// Two runs must agree byte for byte and match the stored file.
pub fn check_golden(name: &str, args: &[&str]) -> Result<(), String> {
    let first = mu0(args);
    let second = mu0(args);
    if !first.status.success() {
        return Err(format!(
            "{name}: exit {:?}: {}",
            first.status.code(),
            String::from_utf8_lossy(&first.stderr)
        ));
    }
    let (a, b) = (normalize(&first.stdout), normalize(&second.stdout));
    if a != b {
        return Err(format!("{name}: two runs differ"));
    }
    let path = golden_path(name, &a);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &a).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let stored = std::fs::read_to_string(&path).map_err(|e| {
        format!(
            "{name}: {} unreadable ({e}); rerun with UPDATE_GOLDEN=1",
            path.display()
        )
    })?;
    if stored != a {
        return Err(format!("{name}: output differs from {}", path.display()));
    }
    Ok(())
}
