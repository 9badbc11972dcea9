use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use frosting::toy::{toy_scene, ToyConfig};
use frosting_ffi::*;

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(frosting_last_error()).to_string_lossy().into_owned() }
}

fn camera(c: &frosting::Camera) -> FrostingCamera {
    let mut rotation = [0.0; 9];
    for r in 0..3 {
        for k in 0..3 {
            rotation[3 * r + k] = c.rotation[(r, k)];
        }
    }
    FrostingCamera {
        rotation,
        translation: [c.translation.x, c.translation.y, c.translation.z],
        fx: c.fx,
        fy: c.fy,
        cx: c.cx,
        cy: c.cy,
        width: c.width,
        height: c.height,
        near: c.near,
    }
}

#[test]
fn scene_handle_lifecycle() {
    let toy = toy_scene(&ToyConfig {
        budget: 200,
        cameras: 2,
        width: 20,
        height: 16,
        ..Default::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let pkg = dir.path().join("pkg");
    frosting::io::store_package(&pkg, &toy.scene).unwrap();
    let reference = frosting::io::load_package(&pkg).unwrap();

    unsafe {
        let mut scene: *mut FrostingScene = ptr::null_mut();
        assert_eq!(frosting_scene_load(cstr(&pkg).as_ptr(), &mut scene), FrostingStatus::Ok);
        assert!(!scene.is_null());
        let mut n = 0usize;
        assert_eq!(frosting_scene_gaussian_count(scene, &mut n), FrostingStatus::Ok);
        assert_eq!(n, 200);

        let cam = camera(&toy.cameras[0]);
        let mut rgb = vec![0f32; 3 * 20 * 16];
        assert_eq!(frosting_scene_render(scene, &cam, rgb.as_mut_ptr(), rgb.len()), FrostingStatus::Ok);
        let expected = reference.render(&toy.cameras[0]).unwrap();
        for (a, b) in rgb.iter().zip(&expected.data) {
            assert_eq!(*a, *b as f32);
        }
        assert_eq!(
            frosting_scene_render(scene, &cam, rgb.as_mut_ptr(), 10),
            FrostingStatus::BufferTooSmall
        );
        assert!(last_error().contains("needs 960"));

        let shifted: Vec<f64> = reference
            .mesh
            .vertices
            .iter()
            .flat_map(|v| [v.x + 1.0, v.y, v.z])
            .collect();
        let mut moved: *mut FrostingScene = ptr::null_mut();
        let nv = reference.mesh.vertices.len();
        assert_eq!(frosting_scene_deform(scene, shifted.as_ptr(), nv, &mut moved), FrostingStatus::Ok);
        let mut wrong: *mut FrostingScene = ptr::null_mut();
        assert_eq!(
            frosting_scene_deform(scene, shifted.as_ptr(), nv - 1, &mut wrong),
            FrostingStatus::Topology
        );
        assert!(wrong.is_null());
        let msg = last_error();
        assert!(msg.contains(&nv.to_string()) && msg.contains(&(nv - 1).to_string()), "{msg}");

        let out = dir.path().join("moved");
        assert_eq!(frosting_scene_save(moved, cstr(&out).as_ptr()), FrostingStatus::Ok);
        let back = frosting::io::load_package(&out).unwrap();
        let (a, b) = (&reference.gaussians[0], &back.gaussians[0]);
        let pa = a.position(&reference.layer).unwrap();
        let pb = b.position(&back.layer).unwrap();
        assert!((pb.x - pa.x - 1.0).abs() < 1e-5 && (pb.y - pa.y).abs() < 1e-5);

        frosting_scene_free(moved);
        frosting_scene_free(scene);
        frosting_scene_free(ptr::null_mut());
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut scene: *mut FrostingScene = ptr::null_mut();
        assert_eq!(frosting_scene_load(ptr::null(), &mut scene), FrostingStatus::NullPointer);
        let missing = CString::new("/nonexistent/frosting/pkg").unwrap();
        assert_eq!(frosting_scene_load(missing.as_ptr(), &mut scene), FrostingStatus::Io);
        assert!(last_error().contains("/nonexistent/frosting/pkg"));
        assert!(scene.is_null());

        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("manifest.json"), r#"{"version": "9.0"}"#).unwrap();
        assert_eq!(frosting_scene_load(cstr(dir.path()).as_ptr(), &mut scene), FrostingStatus::Version);

        let mut n = 0usize;
        assert_eq!(frosting_scene_gaussian_count(ptr::null(), &mut n), FrostingStatus::NullPointer);
        assert_eq!(CStr::from_ptr(frosting_version()).to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn cloud_and_contraction() {
    let dir = tempfile::tempdir().unwrap();
    let mut gs = Vec::new();
    for x in 0..5 {
        for y in 0..5 {
            for z in 0..5 {
                gs.push(frosting::Gaussian3D::isotropic(
                    frosting::math::Vec3::new(x as f64, y as f64, z as f64),
                    0.1,
                    0.5,
                ));
            }
        }
    }
    let cloud = frosting::GaussianCloud::new(gs, 0, frosting::CloudRole::Regularized).unwrap();
    let path = dir.path().join("grid.ply");
    frosting::io::write_gaussian_ply(&path, &cloud).unwrap();
    unsafe {
        let mut handle: *mut FrostingCloud = ptr::null_mut();
        assert_eq!(frosting_cloud_read_ply(cstr(&path).as_ptr(), &mut handle), FrostingStatus::Ok);
        let mut n = 0usize;
        assert_eq!(frosting_cloud_len(handle, &mut n), FrostingStatus::Ok);
        assert_eq!(n, 125);
        let mut advice = FrostingDepthAdvice::default();
        assert_eq!(frosting_cloud_depth_advice(handle, 100.0, &mut advice), FrostingStatus::Ok);
        assert_eq!(advice.cs, 0.25);
        assert_eq!(advice.l_box, 4.0);
        assert_eq!(advice.depth, 1);
        assert_eq!(frosting_cloud_depth_advice(handle, -1.0, &mut advice), FrostingStatus::InvalidArgument);
        frosting_cloud_free(handle);

        let (p, c) = ([3.0, 0.0, 0.0], [0.0; 3]);
        let mut out = [0.0; 3];
        assert_eq!(frosting_contract_point(p.as_ptr(), c.as_ptr(), 1.0, out.as_mut_ptr()), FrostingStatus::Ok);
        assert!((out[0] - (2.0 - 1.0 / 3.0)).abs() < 1e-12);
        assert_eq!(
            frosting_contract_point(p.as_ptr(), c.as_ptr(), 0.0, out.as_mut_ptr()),
            FrostingStatus::InvalidArgument
        );
    }
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/frosting.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "frosting_scene_load",
        "frosting_scene_render",
        "frosting_scene_deform",
        "frosting_cloud_depth_advice",
        "frosting_contract_point",
        "frosting_last_error",
        "FROSTING_STATUS_TOPOLOGY",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let status = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .status();
    match status {
        Ok(s) => assert!(s.success(), "header does not compile as C"),
        Err(e) => eprintln!("no C compiler available ({e}); syntax check not run"),
    }
}
