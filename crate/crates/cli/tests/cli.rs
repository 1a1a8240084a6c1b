use std::path::Path;
use std::process::{Command, Output};

fn microtube(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_microtube"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_tensor(path: &Path) -> [[f64; 2]; 2] {
    let text = std::fs::read_to_string(path).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    [[rows[0][0], rows[0][1]], [rows[1][0], rows[1][1]]]
}

#[test]
fn init_writes_a_loadable_config_and_keeps_existing_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = microtube(&["init", "--config", "c.toml", "--grid", "40"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("c.toml")).unwrap();
    assert!(text.contains("n = 40"));
    let o = microtube(&["init", "--config", "c.toml"], dir.path());
    assert_eq!(code(&o), 2);
    let o = microtube(&["init", "--config", "c.toml", "--force"], dir.path());
    assert_eq!(code(&o), 0);
}

#[test]
fn misspelled_key_is_a_config_error_naming_key_and_section() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[al]\nmax_iter = 3\n").unwrap();
    let o = microtube(&["solve-cell", "--config", "c.toml"], dir.path());
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("max_iter") && err.contains("[al]"), "{err}");
}

#[test]
fn bad_arguments_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = microtube(
        &["solve-cell", "--seed-shape", "circle(0.5,0.5"],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
    let o = microtube(&["solve-cell", "--grid", "2"], dir.path());
    assert_eq!(code(&o), 2);
    let o = microtube(&["no-such-command"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn solve_cell_on_empty_shape_gives_constant_solutions() {
    let dir = tempfile::tempdir().unwrap();
    let o = microtube(
        &[
            "--quiet",
            "solve-cell",
            "--grid",
            "32",
            "--seed-shape",
            "empty()",
            "--out",
            "e",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let k = read_tensor(&dir.path().join("e/K.csv"));
    let d = read_tensor(&dir.path().join("e/D.csv"));
    for a in 0..2 {
        for b in 0..2 {
            let eye = if a == b { 1.0 } else { 0.0 };
            assert!((k[a][b] - 0.4 * eye).abs() < 1e-8, "{k:?}");
            assert!((d[a][b] - eye).abs() < 1e-8, "{d:?}");
        }
    }
}

#[test]
fn solve_cell_writes_reports_and_raster_input_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let o = microtube(&["solve-cell", "--grid", "64", "--out", "c"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let trk: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("tr(K)/d = "))
        .expect("tr(K)/d line")
        .parse()
        .unwrap();
    assert!((0.0077..=0.0143 * 1.05).contains(&trk), "{trk}");
    for f in ["K.csv", "D.csv", "measures.csv", "contour.csv", "cell.vtk"] {
        assert!(dir.path().join("c").join(f).is_file(), "{f}");
    }
    let measures = std::fs::read_to_string(dir.path().join("c/measures.csv")).unwrap();
    assert!(measures.starts_with("perimeter,area\n"));
    let vtk = std::fs::read_to_string(dir.path().join("c/cell.vtk")).unwrap();
    for name in [
        "psi",
        "rho",
        "curvature",
        "p_1",
        "pi_2",
        "speed_1",
        "u_1",
        "u_2",
    ] {
        assert!(vtk.contains(&format!(" {name} ")), "{name}");
    }

    let o = microtube(&["tile", "c/cell.vtk", "--out", "mask.pgm"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    std::fs::write(
        dir.path().join("m.toml"),
        "[grid]\nn = 64\n[shape]\nkind = \"mask\"\npath = \"mask.pgm\"\n",
    )
    .unwrap();
    let o = microtube(
        &["solve-cell", "--config", "m.toml", "--out", "m"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let kp = read_tensor(&dir.path().join("c/K.csv"));
    let km = read_tensor(&dir.path().join("m/K.csv"));
    let rel = (km[0][0] - kp[0][0]).abs() / kp[0][0];
    assert!(
        rel < 0.02,
        "primitive {} raster {} ({rel})",
        kp[0][0],
        km[0][0]
    );
}

#[test]
fn tile_is_seamless_and_missing_dump_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = microtube(
        &["--quiet", "solve-cell", "--grid", "32", "--out", "c"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = microtube(&["tile", "c/cell.vtk", "--repeat", "3"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("0 seam mismatches"));
    let text = std::fs::read_to_string(dir.path().join("c/cell.pgm")).unwrap();
    let mut tokens = text.split_whitespace();
    assert_eq!(tokens.next(), Some("P2"));
    let w: usize = tokens.next().unwrap().parse().unwrap();
    let h: usize = tokens.next().unwrap().parse().unwrap();
    assert_eq!((w, h), (96, 96));
    tokens.next();
    let px: Vec<u8> = tokens.map(|t| t.parse().unwrap()).collect();
    assert_eq!(px.len(), w * h);
    for r in 0..h {
        for c in 0..w {
            assert_eq!(px[r * w + c], px[(r % 32) * w + c % 32]);
        }
    }
    let o = microtube(&["tile", "missing.vtk"], dir.path());
    assert_ne!(code(&o), 0);
    let o = microtube(&["tile", "c/cell.vtk", "--repeat", "0"], dir.path());
    assert_ne!(code(&o), 0);
}

#[test]
fn optimize_with_no_iterations_reports_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let o = microtube(
        &["optimize", "--grid", "32", "--max-iters", "0", "--out", "z"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let line = stdout(&o);
    assert!(
        line.contains("iterations 0") && line.contains("gain +0.00%"),
        "{line}"
    );
    let history = std::fs::read_to_string(dir.path().join("z/history.csv")).unwrap();
    assert_eq!(
        history,
        "n,perimeter,area,trk_over_d,g1,g2,l1,l2,mu1,mu2,lagrangian,dt,reinit,stagnated\n"
    );
    assert!(dir.path().join("z/measures.csv").is_file());
}

#[test]
fn resume_continues_the_run_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let run = |args: &[&str]| {
        let o = microtube(args, p);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        o
    };
    std::fs::write(
        p.join("c.toml"),
        "[grid]\nn = 32\n[output]\ndump_every = 3\n",
    )
    .unwrap();
    run(&[
        "--quiet",
        "optimize",
        "--config",
        "c.toml",
        "--max-iters",
        "8",
        "--out",
        "full",
    ]);
    run(&[
        "--quiet",
        "optimize",
        "--config",
        "c.toml",
        "--max-iters",
        "4",
        "--out",
        "half",
    ]);
    assert!(p.join("half/psi_0003.vtk").is_file());
    run(&[
        "--quiet",
        "resume",
        "half/checkpoint.json",
        "--config",
        "c.toml",
        "--max-iters",
        "8",
        "--out",
        "rest",
    ]);
    let full = std::fs::read(p.join("full/history.csv")).unwrap();
    assert_eq!(full, std::fs::read(p.join("rest/history.csv")).unwrap());
    assert_eq!(
        std::fs::read(p.join("full/final.vtk")).unwrap(),
        std::fs::read(p.join("rest/final.vtk")).unwrap()
    );

    std::fs::write(p.join("d.toml"), "[grid]\nn = 32\n[al]\ngamma = 2.0\n").unwrap();
    let o = microtube(&["resume", "half/checkpoint.json", "--config", "d.toml"], p);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let o = microtube(
        &[
            "--quiet",
            "resume",
            "half/checkpoint.json",
            "--config",
            "d.toml",
            "--max-iters",
            "5",
            "--allow-config-change",
            "--out",
            "changed",
        ],
        p,
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn check_gradients_passes_on_circle_and_flat_band() {
    let dir = tempfile::tempdir().unwrap();
    for (shape, out) in [("circle(0.5,0.5,0.3)", "c"), ("band(y,0.5,0.15)", "b")] {
        let o = microtube(
            &[
                "--quiet",
                "check-gradients",
                "--grid",
                "64",
                "--seed-shape",
                shape,
                "--out",
                out,
            ],
            dir.path(),
        );
        assert_eq!(code(&o), 0, "{shape}: {}{}", stdout(&o), stderr(&o));
        assert_eq!(stdout(&o).matches("PASS").count(), 3);
        for f in ["perimeter", "volume", "trk"] {
            let csv = dir.path().join(out).join(format!("gradcheck_{f}.csv"));
            let text = std::fs::read_to_string(csv).unwrap();
            assert!(text.starts_with("eps,quotient,analytic,rel_error\n"));
            assert_eq!(text.lines().count(), 5);
        }
    }
}
