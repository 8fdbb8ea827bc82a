use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn lfbp(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lfbp"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path, out: &str) -> PathBuf {
    let path = dir.join(format!("{out}.json"));
    let text = format!(
        r#"{{
  "scene": {{ "synthetic": {{ "size_px": 24, "extent_mm": 48.0, "spacing_mm": 10.0 }} }},
  "psf": {{ "na": 0.3 }},
  "sweep": {{ "m_values": [3, 5], "na_values": [0.2, 0.4], "depth_range_mm": [-10, 10] }},
  "angular": {{ "n_xi": 3, "n_eta": 3 }},
  "filter": {{ "sigma_smooth": 0.5 }},
  "outputs": {{ "dir": "{out}", "refocus_depths_mm": [-10], "depth_map": true }},
  "workers": 2
}}"#
    );
    fs::write(&path, text).unwrap();
    path
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut todo = vec![root.to_path_buf()];
    while let Some(dir) = todo.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                todo.push(path);
            } else {
                out.push(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

#[test]
fn sweep_writes_complete_csv_and_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["run_a", "run_b"] {
        let cfg = small_config(dir.path(), out);
        let res = lfbp(&["sweep", cfg.to_str().unwrap()], dir.path());
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let (a, b) = (dir.path().join("run_a"), dir.path().join("run_b"));
    let files = files_under(&a);
    assert_eq!(files, files_under(&b));
    for f in &files {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{} differs", f.display());
    }

    let csv = fs::read_to_string(a.join("psnr.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "method,M,NA,psnr_db");
    assert_eq!(lines.len(), 1 + 2 * 2 * 2);
    let mut keys: Vec<String> = lines[1..].iter().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), 8);
    for m in ["conventional", "filtered"] {
        for na in ["0.2", "0.4"] {
            for mm in ["3", "5"] {
                assert!(keys.contains(&format!("{m},{mm},{na}")));
            }
        }
    }
    for cell in ["NA0.2_M3", "NA0.4_M5"] {
        for name in ["result.json", "epi_filtered.png", "epi_conventional.png", "depth_map.png", "refocus_filtered_zm10.png"] {
            assert!(a.join("cells").join(cell).join(name).is_file(), "{cell}/{name}");
        }
    }
}

#[test]
fn simulate_reconstruct_epi_refocus_depthmap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "out");
    let cfg = cfg.to_str().unwrap();
    let ok = |res: Output| {
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        String::from_utf8(res.stdout).unwrap()
    };
    ok(lfbp(&["simulate", cfg], dir.path()));
    let out = dir.path().join("out");
    for p in ["exact.lf4d", "scene/stack.json", "stack_M3/stack.json", "stack_M5/capture_004.pgm"] {
        assert!(out.join(p).is_file(), "{p}");
    }

    ok(lfbp(&["reconstruct", cfg, "--method", "conventional", "--m", "5"], dir.path()));
    ok(lfbp(&["reconstruct", cfg, "--method", "filtered"], dir.path()));
    let lf = out.join("filtered.lf4d");
    assert_eq!(fs::metadata(&lf).unwrap().len(), 54 + 4 * 24 * 24 * 9);

    let stdout = ok(lfbp(
        &["epi", lf.to_str().unwrap(), "--y-frac", "0.5", "--eta", "-0.3", "--out", "epi.png"],
        dir.path(),
    ));
    assert!(stdout.contains("epi.png"));
    let epi = image::open(dir.path().join("epi.png")).unwrap();
    assert_eq!((epi.width(), epi.height()), (24, 3));

    ok(lfbp(&["refocus", lf.to_str().unwrap(), "--depth", "-10"], dir.path()));
    assert!(out.join("filtered.refocus.png").is_file());

    let stdout = ok(lfbp(&["depthmap", cfg], dir.path()));
    assert!(stdout.contains("covered"));
    let map = image::open(out.join("depth_map.png")).unwrap().into_luma16();
    assert!(map.pixels().all(|p| p.0[0] < 3));
}

#[test]
fn reconstruct_from_stack_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "out");
    assert!(lfbp(&["simulate", cfg.to_str().unwrap()], dir.path()).status.success());
    let real = dir.path().join("real.json");
    fs::write(
        &real,
        r#"{"scene": {"stack_dir": {"path": "out/stack_M3", "crop": [20, 20], "downsample": 2}},
            "psf": {"na": 0.3}, "angular": {"n_xi": 3, "n_eta": 1}, "outputs": {"dir": "real"}}"#,
    )
    .unwrap();
    let res = lfbp(&["reconstruct", real.to_str().unwrap(), "--method", "filtered"], dir.path());
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(
        fs::metadata(dir.path().join("real/filtered.lf4d")).unwrap().len(),
        54 + 4 * 10 * 10 * 3
    );
    // a directory has no ground truth to sweep against
    let res = lfbp(&["sweep", real.to_str().unwrap()], dir.path());
    assert!(!res.status.success());
}

#[test]
fn invalid_config_exits_nonzero_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"scene": {"synthetic": {"size_px": 8, "extent_mm": 8, "spacing_mm": 2}}, "psf": {"na": 1.2}}"#, "psf.na"),
        (
            r#"{"scene": {"synthetic": {"size_px": 8, "extent_mm": 8, "spacing_mm": 2}}, "psf": {"na": 0.4},
                "sweep": {"m_values": []}}"#,
            "sweep.m_values",
        ),
        (r#"{"scene": {"stack_dir": {"path": "missing"}}, "psf": {"na": 0.4}}"#, "stack_dir.path"),
        (r#"{"scene": {}, "psf": {"na": 0.4}"#, "invalid configuration"),
    ];
    for (text, needle) in cases {
        let path = dir.path().join("bad.json");
        fs::write(&path, text).unwrap();
        let res = lfbp(&["sweep", path.to_str().unwrap()], dir.path());
        assert!(!res.status.success());
        let stderr = String::from_utf8_lossy(&res.stderr);
        assert!(stderr.contains(needle), "{stderr}");
    }
}

#[test]
fn epi_with_unsampled_eta_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "out");
    assert!(lfbp(&["simulate", cfg.to_str().unwrap()], dir.path()).status.success());
    let res = lfbp(&["epi", "out/exact.lf4d", "--eta", "0.1"], dir.path());
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("eta"));
}

#[test]
fn help_lists_every_subcommand() {
    let res = lfbp(&["--help"], Path::new("."));
    let text = String::from_utf8(res.stdout).unwrap();
    for cmd in ["simulate", "reconstruct", "epi", "refocus", "sweep", "depthmap"] {
        assert!(text.contains(cmd), "{cmd}");
    }
}
