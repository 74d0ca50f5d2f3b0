use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use epiview::camera::Intrinsics;
use epiview::config::{load_config, Overrides};
use epiview::epipolar::build_mask_set;
use epiview::io::{decode_mask_bitset, decode_pgm, decode_plucker};
use tempfile::TempDir;

const CAMERAS: &str = r#"
fov_deg = 40.26
width = 64
height = 64
res = 16
views = [
  { elevation_deg = 20.0, azimuth_deg = 0.0, distance = 3.5 },
  { elevation_deg = 10.0, azimuth_deg = 70.0, distance = 3.5 },
  { elevation_deg = -15.0, azimuth_deg = 160.0, distance = 3.5 },
  { elevation_deg = 35.0, azimuth_deg = 250.0, distance = 3.5 },
  { elevation_deg = 0.0, azimuth_deg = 310.0, distance = 3.5 },
]
"#;

fn epiview(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epiview"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_cameras(dir: &TempDir, text: &str) -> PathBuf {
    let path = dir.path().join("cameras.toml");
    fs::write(&path, text).unwrap();
    path
}

fn run_ok(args: &[&str]) -> Output {
    let out = epiview(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn sorted_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

fn assert_same_dirs(a: &Path, b: &Path) {
    let names = sorted_files(a);
    assert_eq!(names, sorted_files(b));
    for n in names {
        assert_eq!(
            fs::read(a.join(&n)).unwrap(),
            fs::read(b.join(&n)).unwrap(),
            "{n}"
        );
    }
}

fn csv_rows(csv: &str) -> Vec<(String, f64, f64)> {
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("image,psnr_db,ssim"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 3, "{l}");
            (
                f[0].to_string(),
                f[1].parse().unwrap(),
                f[2].parse().unwrap(),
            )
        })
        .collect()
}

#[test]
fn eval_of_directory_against_itself_is_perfect() {
    let tmp = TempDir::new().unwrap();
    let cams = write_cameras(&tmp, CAMERAS);
    let renders = tmp.path().join("renders");
    run_ok(&["render", "--cameras", s(&cams), "--out", s(&renders)]);
    assert_eq!(
        sorted_files(&renders),
        [
            "depth_0.pgm",
            "depth_1.pgm",
            "depth_2.pgm",
            "depth_3.pgm",
            "depth_4.pgm",
            "scene.toml",
            "view_0.ppm",
            "view_1.ppm",
            "view_2.ppm",
            "view_3.ppm",
            "view_4.ppm",
        ]
    );
    let report = tmp.path().join("report");
    let out = run_ok(&[
        "eval",
        "--pred",
        s(&renders),
        "--target",
        s(&renders),
        "--out",
        s(&report),
    ]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        stdout,
        fs::read_to_string(report.join("metrics.csv")).unwrap()
    );
    let rows = csv_rows(&stdout);
    assert_eq!(rows.len(), 6);
    assert_eq!(rows.last().unwrap().0, "mean");
    for (_, p, q) in rows {
        assert_eq!((p, q), (99.0, 1.0));
    }
    assert!(stdout.contains("view_0.ppm,99.000000,1.000000\n"));
}

#[test]
fn masks_emit_every_ordered_pair() {
    let tmp = TempDir::new().unwrap();
    let cams = write_cameras(&tmp, CAMERAS);
    let out = tmp.path().join("masks");
    run_ok(&[
        "masks",
        "--cameras",
        s(&cams),
        "--res",
        "8",
        "--out",
        s(&out),
    ]);
    let names = sorted_files(&out);
    let pgms: Vec<_> = names.iter().filter(|n| n.starts_with("mask_")).collect();
    assert_eq!(pgms.len(), 5 * 4);
    assert!(names.contains(&"masks.epim".to_string()));
    assert_eq!(names.len(), 5 * 4 + 1);

    let decoded = decode_mask_bitset(&fs::read(out.join("masks.epim")).unwrap(), "masks").unwrap();
    let cfg = load_config(&cams, &Overrides::default()).unwrap();
    let intr = Intrinsics::from_fov(40.26, 64, 64)
        .unwrap()
        .at_resolution(8)
        .unwrap();
    let expected = build_mask_set(&cfg.cameras.poses().unwrap(), &intr).unwrap();
    assert_eq!(decoded, expected);

    let (w, h, values) = decode_pgm(&fs::read(out.join("mask_2_4.pgm")).unwrap(), "pgm").unwrap();
    assert_eq!((w, h), (64, 64));
    for s in 0..64 {
        for t in 0..64 {
            assert_eq!(values[s * 64 + t] != 0, expected.allowed(2, 4, s, t));
        }
    }
}

#[test]
fn plucker_writes_one_grid_per_view() {
    let tmp = TempDir::new().unwrap();
    let cams = write_cameras(&tmp, CAMERAS);
    let out = tmp.path().join("plucker");
    run_ok(&["plucker", "--cameras", s(&cams), "--out", s(&out)]);
    assert_eq!(sorted_files(&out).len(), 5);
    let g = decode_plucker(&fs::read(out.join("plucker_3.bin")).unwrap(), "bin").unwrap();
    assert_eq!((g.height(), g.width()), (16, 16));
    for s in 0..256 {
        assert!((g.direction(s).norm() - 1.0).abs() <= 1e-12);
        assert!(g.moment(s).dot(&g.direction(s)).abs() <= 1e-12);
    }
}

#[test]
fn oracle_sampling_reproduces_rendered_targets() {
    let tmp = TempDir::new().unwrap();
    let cams = write_cameras(&tmp, CAMERAS);
    let renders = tmp.path().join("renders");
    run_ok(&["render", "--cameras", s(&cams), "--out", s(&renders)]);
    let sample = |dir: &Path| {
        run_ok(&[
            "sample",
            "--cameras",
            s(&cams),
            "--views",
            "4",
            "--steps",
            "200",
            "--seed",
            "0",
            "--targets",
            s(&renders),
            "--out",
            s(dir),
        ]);
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    sample(&a);
    sample(&b);
    assert_eq!(
        sorted_files(&a),
        ["view_0.ppm", "view_1.ppm", "view_2.ppm", "view_3.ppm"]
    );
    assert_same_dirs(&a, &b);

    let report = tmp.path().join("report");
    let out = run_ok(&[
        "eval",
        "--pred",
        s(&a),
        "--target",
        s(&renders),
        "--out",
        s(&report),
    ]);
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 5);
    for (name, p, _) in rows {
        assert!(p >= 60.0, "{name}: {p} dB");
    }
}

#[test]
fn sampling_without_targets_matches_render_round_trip() {
    let tmp = TempDir::new().unwrap();
    let cams = write_cameras(&tmp, CAMERAS);
    let renders = tmp.path().join("renders");
    run_ok(&["render", "--cameras", s(&cams), "--out", s(&renders)]);
    let out = tmp.path().join("samples");
    run_ok(&[
        "sample",
        "--cameras",
        s(&cams),
        "--steps",
        "50",
        "--blob-steps",
        "5",
        "--out",
        s(&out),
    ]);
    assert_eq!(sorted_files(&out).len(), 5);
    for i in 0..5 {
        let name = format!("view_{i}.ppm");
        assert_eq!(
            fs::read(out.join(&name)).unwrap(),
            fs::read(renders.join(&name)).unwrap()
        );
    }
}

#[test]
fn commands_are_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cams = write_cameras(&tmp, CAMERAS);
    for cmd in ["masks", "plucker", "render"] {
        let (a, b) = (
            tmp.path().join(format!("{cmd}_a")),
            tmp.path().join(format!("{cmd}_b")),
        );
        run_ok(&[cmd, "--cameras", s(&cams), "--res", "8", "--out", s(&a)]);
        run_ok(&[cmd, "--cameras", s(&cams), "--res", "8", "--out", s(&b)]);
        assert_same_dirs(&a, &b);
    }
}

fn assert_input_error(args: &[&str], needle: &str) {
    let out = epiview(args);
    assert_eq!(out.status.code(), Some(2), "{args:?}");
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains(needle), "{stderr}");
}

#[test]
fn bad_inputs_exit_with_code_two() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = s(&out);

    let cams = write_cameras(&tmp, CAMERAS);
    assert_input_error(
        &["masks", "--cameras", s(&cams), "--res", "33", "--out", o],
        "res",
    );
    assert_input_error(
        &[
            "sample",
            "--cameras",
            s(&cams),
            "--steps",
            "10",
            "--blob-steps",
            "20",
            "--out",
            o,
        ],
        "blob_steps",
    );
    assert_input_error(
        &["sample", "--cameras", s(&cams), "--views", "9", "--out", o],
        "views",
    );
    assert_input_error(&["render", "--cameras", s(&cams)], "out");

    let missing = tmp.path().join("missing.toml");
    assert_input_error(
        &["render", "--cameras", s(&missing), "--out", o],
        "missing.toml",
    );

    let typo = write_cameras(&tmp, "views = []\nstepz = 3\n");
    assert_input_error(&["render", "--cameras", s(&typo), "--out", o], "stepz");

    let cams = write_cameras(&tmp, CAMERAS);
    assert_input_error(
        &[
            "sample",
            "--cameras",
            s(&cams),
            "--targets",
            s(&missing),
            "--out",
            o,
        ],
        "view_0.ppm",
    );
    assert_input_error(
        &["eval", "--pred", s(&missing), "--target", o, "--out", o],
        "missing",
    );
    assert_input_error(&["frobnicate"], "frobnicate");

    for args in [
        &["render", "--cameras", s(&missing), "--out", o][..],
        &["masks", "--cameras", s(&cams), "--res", "33", "--out", o],
    ] {
        let stderr = String::from_utf8(epiview(args).stderr).unwrap();
        assert_eq!(stderr.trim_end().lines().count(), 1, "{stderr}");
    }
    assert!(!out.exists() || sorted_files(&out).is_empty());
}

#[test]
fn outputs_leave_no_temporary_files() {
    let tmp = TempDir::new().unwrap();
    let cams = write_cameras(&tmp, CAMERAS);
    let out = tmp.path().join("r");
    run_ok(&["render", "--cameras", s(&cams), "--out", s(&out)]);
    run_ok(&["render", "--cameras", s(&cams), "--out", s(&out)]);
    assert_eq!(sorted_files(&out).len(), 11);
}
