use std::path::Path;

use frosting::error::Error;
use frosting::io::{self, CameraFile, CameraFrame};
use frosting::math::Vec3;
use frosting::optim::AdamState;
use frosting::render::Image;

fn put(buf: &mut Vec<u8>, v: f32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

#[test]
fn ply_with_foreign_layout() {
    // Shuffled property order, an extra double and uchar, degree 1 and a trailing face element.
    let mut names: Vec<String> = vec!["opacity".into(), "x".into(), "y".into(), "z".into()];
    names.extend((0..9).map(|i| format!("f_rest_{i}")));
    names.extend(["f_dc_0", "f_dc_1", "f_dc_2"].map(String::from));
    names.extend((0..3).map(|i| format!("scale_{i}")));
    names.extend((0..4).map(|i| format!("rot_{i}")));
    let mut header = String::from("ply\nformat binary_little_endian 1.0\ncomment exported elsewhere\nelement vertex 2\n");
    header.push_str("property double confidence\n");
    for n in &names {
        header.push_str(&format!("property float {n}\n"));
    }
    header.push_str("property uchar tag\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n");
    let mut bytes = header.into_bytes();
    for v in 0..2 {
        bytes.extend_from_slice(&0.5f64.to_le_bytes());
        for (i, _) in names.iter().enumerate() {
            put(&mut bytes, (100 * v + i) as f32);
        }
        bytes.push(7);
    }
    bytes.push(3);
    for i in 0..3i32 {
        bytes.extend_from_slice(&i.to_le_bytes());
    }

    let cloud = io::parse_gaussian_ply(Path::new("mem.ply"), &bytes).unwrap();
    assert_eq!(cloud.sh_degree, 1);
    assert_eq!(cloud.len(), 2);
    let g = &cloud.gaussians[1];
    assert_eq!(g.opacity_logit, 100.0);
    assert_eq!(g.mean, Vec3::new(101.0, 102.0, 103.0));
    // f_rest is stored channel-major: f_rest_{c*3 + k} is coefficient k+1 of channel c.
    for c in 0..3 {
        for k in 0..3 {
            assert_eq!(g.sh[3 * (k + 1) + c], (100 + 4 + c * 3 + k) as f64);
        }
    }
    assert_eq!(&g.sh[..3], &[113.0, 114.0, 115.0]);
    assert_eq!(g.log_scales, Vec3::new(116.0, 117.0, 118.0));
    assert_eq!(g.rotation.w, 119.0);
    assert_eq!(g.rotation.k, 122.0);
}

#[test]
fn big_endian_ply_is_rejected() {
    let bytes = b"ply\nformat binary_big_endian 1.0\nelement vertex 0\nproperty float x\nend_header\n";
    assert!(matches!(
        io::parse_gaussian_ply(Path::new("be.ply"), bytes),
        Err(Error::UnsupportedFormat(_))
    ));
}

#[test]
fn obj_polygons_and_relative_indices() {
    let text = "# quad and a pentagon\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nvn 0 0 1\n\
                f 1/1/1 2/1/1 3/1/1 4/1/1\nv 2 0 0\nv 3 0 0\nv 3 1 0\nv 2.5 2 0\nv 2 1 0\nf -5 -4 -3 -2 -1\n";
    let mesh = io::parse_obj(Path::new("poly.obj"), text).unwrap();
    assert_eq!(mesh.vertices.len(), 9);
    assert_eq!(mesh.faces, vec![[0, 1, 2], [0, 2, 3], [4, 5, 6], [4, 6, 7], [4, 7, 8]]);

    match io::parse_obj(Path::new("bad.obj"), "v 0 0 0\nv oops 0 0\n") {
        Err(Error::Parse { position, .. }) => assert!(position.contains("line 2"), "{position}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn nerf_camera_convention() {
    // Camera at +4z looking down -z (OpenGL), +y up.
    let file = CameraFile {
        camera_angle_x: std::f64::consts::FRAC_PI_2,
        w: Some(100),
        h: Some(80),
        near: None,
        frames: vec![CameraFrame {
            file_path: Some("./test/r_3".into()),
            transform_matrix: [
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, 4.0],
                [0.0, 0.0, 0.0, 1.0],
            ],
        }],
    };
    let cam = &file.cameras().unwrap()[0];
    assert!((cam.fx - 50.0).abs() < 1e-12);
    assert!((cam.center() - Vec3::new(0.0, 0.0, 4.0)).norm() < 1e-12);
    let origin = cam.to_camera(&Vec3::zeros());
    assert!((origin - Vec3::new(0.0, 0.0, 4.0)).norm() < 1e-12);
    let right = cam.to_camera(&Vec3::x());
    let up = cam.to_camera(&Vec3::y());
    assert!(right.x > 0.0 && up.y < 0.0);
    assert_eq!(file.image_name(0), "r_3.png");

    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("transforms.json");
    io::write_camera_file(&p, &file).unwrap();
    assert_eq!(io::read_camera_file(&p).unwrap(), file);

    let p2 = dir.path().join("broken.json");
    std::fs::write(&p2, "{\n  \"camera_angle_x\": 0.5,\n  \"frames\": [ {\"transform_matrix\": }\n]}").unwrap();
    match io::read_camera_file(&p2) {
        Err(Error::Parse { position, .. }) => assert!(position.contains("line 3"), "{position}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn png_round_trip_quantizes_to_8_bits() {
    let dir = tempfile::tempdir().unwrap();
    let mut img = Image::new(5, 3);
    for (i, v) in img.data.iter_mut().enumerate() {
        *v = (i as f64 * 0.037) % 1.0;
    }
    let p = dir.path().join("a.png");
    io::write_png(&p, &img).unwrap();
    let back = io::read_png(&p).unwrap();
    assert!(back.same_shape(&img));
    assert!(back.max_abs_diff(&img) <= 0.5 / 255.0 + 1e-12);
    io::write_png(&dir.path().join("b.png"), &back).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(dir.path().join("b.png")).unwrap());
}

#[test]
fn optimizer_state_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let state = AdamState {
        step: 17,
        m: vec![0.25, -1e-300, 3.5],
        v: vec![1.0, 2.0, f64::MIN_POSITIVE],
    };
    let p = dir.path().join("optimizer.bin");
    io::write_optimizer_state(&p, &state).unwrap();
    let back = io::read_optimizer_state(&p).unwrap();
    assert_eq!((back.step, &back.m, &back.v), (17, &state.m, &state.v));

    let mut bytes = std::fs::read(&p).unwrap();
    bytes[0] = b'X';
    std::fs::write(&p, &bytes).unwrap();
    assert!(io::read_optimizer_state(&p).is_err());
}
