use std::path::Path;
use std::process::{Command, Output};

use tetdeform::fixtures::{colored_cube, icosphere, orbit_cameras};
use tetdeform::renderer::{render, RenderMode};
use tetdeform::Vec3;

fn tetdeform(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tetdeform"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn report(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn lattice_writes_full_grid() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("grid");
    let out = tetdeform(&["lattice", "--res", "2", "--out", s(&stem)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let node = std::fs::read_to_string(stem.with_extension("node")).unwrap();
    assert!(node.starts_with("27 3 0 0\n"));
    let ele = std::fs::read_to_string(stem.with_extension("ele")).unwrap();
    assert!(ele.starts_with("48 4 0\n"));
    assert_eq!(ele.lines().count(), 49);
}

#[test]
fn tetmesh_then_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    tetdeform::io::write_obj(&icosphere(Vec3::repeat(0.5), 0.3, 2), &p("sphere.obj")).unwrap();
    std::fs::write(p("run.cfg"), "# small run\nresolution = 4\niterations = 10\ndistance_samples = 2000\n").unwrap();
    let out = tetdeform(&[
        "tetmesh", "--surface", s(&p("sphere.obj")), "--config", s(&p("run.cfg")), "--out", s(&p("mesh")),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&p("mesh.report.json"));
    for key in [
        "min_dihedral", "mean_amips", "max_amips", "flipped_count", "hausdorff", "chamfer", "tet_count", "vertex_count",
    ] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    assert!(r["chamfer"].as_f64().unwrap() < 0.1);
    let trace = std::fs::read_to_string(p("mesh.trace.log")).unwrap();
    assert_eq!(trace.lines().count(), 10);

    // the extracted surface against itself
    let out = tetdeform(&[
        "metrics", "--pred", s(&p("mesh")), "--gt", s(&p("mesh.obj")), "--out", s(&p("self.json")), "--samples", "3000",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&p("self.json"));
    assert!(r["chamfer"].as_f64().unwrap() < 1e-12);
    assert!(r["hausdorff"].as_f64().unwrap() < 1e-12);
}

#[test]
fn render_and_reconstruct() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let (grid, truth) = colored_cube(3).unwrap();
    let cameras = orbit_cameras(3, 10, 10, 2.5, 0.0);
    tetdeform::io::write_cameras(&cameras, &p("cams.json")).unwrap();
    std::fs::create_dir(p("views")).unwrap();
    for (i, c) in cameras.iter().enumerate() {
        let image = render(&grid, c, RenderMode::Soft { attributes: &truth, cull: true }).unwrap();
        tetdeform::io::write_png(&p(&format!("views/view_{i:03}.png")), &image).unwrap();
    }
    std::fs::write(p("mv.cfg"), "resolution = 3\niterations = 30\nlr_attributes = 0.05\n").unwrap();
    let out = tetdeform(&[
        "recon-mv", "--images", s(&p("views")), "--cameras", s(&p("cams.json")), "--config", s(&p("mv.cfg")),
        "--out", s(&p("mv")),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&p("mv.report.json"));
    assert!(r["psnr"].as_f64().is_some());
    assert!(r["chamfer"].is_null());

    let out = tetdeform(&[
        "render", "--nodes", s(&p("mv")), "--attrs", s(&p("mv.attrs")), "--cameras", s(&p("cams.json")), "--out",
        s(&p("again")),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for i in 0..3 {
        let image = tetdeform::io::read_png(&p(&format!("again/view_{i:03}.png"))).unwrap();
        assert_eq!((image.width, image.height), (10, 10));
    }
    let out = tetdeform(&["render", "--nodes", s(&p("mv")), "--cameras", s(&p("cams.json")), "--out", s(&p("hard"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(p("hard/view_002.png").exists());
}

#[test]
fn exit_codes() {
    assert_eq!(tetdeform(&["--help"]).status.code(), Some(0));
    assert_eq!(tetdeform(&["lattice", "--bogus"]).status.code(), Some(1));
    assert_eq!(tetdeform(&["frobnicate"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.obj");
    let out = tetdeform(&["tetmesh", "--surface", s(&missing), "--out", s(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.obj"));
    let out = tetdeform(&["lattice", "--res", "0", "--out", s(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
}
