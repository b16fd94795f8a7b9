use std::ffi::{c_char, CStr, CString};
use std::ptr;

use partsketch_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe {
        ps_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn cross_sketch() -> Vec<u8> {
    let mut px = vec![255u8; 256 * 256];
    for i in 40..210 {
        for w in 0..3 {
            px[(128 + w) * 256 + i] = 0;
            px[i * 256 + 128 + w] = 0;
        }
    }
    px
}

#[test]
fn null_handles_are_reported() {
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { ps_model_load(ptr::null(), 0, &mut model) }, PsStatus::NullPointer);
    assert!(model.is_null());
    assert!(last_error().contains("path"));
    assert_eq!(unsafe { ps_model_slots(ptr::null()) }, 0);
    assert_eq!(unsafe { ps_mesh_vertex_count(ptr::null()) }, 0);
    unsafe {
        ps_model_free(ptr::null_mut());
        ps_mesh_free(ptr::null_mut());
    }
}

#[test]
fn missing_checkpoint_is_io_error() {
    let path = CString::new("/nonexistent/model.ckpt").unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { ps_model_load(path.as_ptr(), 0, &mut model) }, PsStatus::Io);
    assert!(last_error().starts_with("io_error"));
}

#[test]
fn blank_sketch_maps_to_empty_sketch() {
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { ps_model_new_desk(3, 16, &mut model) }, PsStatus::Ok);
    assert_eq!(unsafe { ps_model_slots(model) }, 8);
    let blank = vec![255u8; 256 * 256];
    let mut mesh = ptr::null_mut();
    let status = unsafe { ps_generate(model, blank.as_ptr(), 256, 256, &mut mesh) };
    assert_eq!(status, PsStatus::EmptySketch);
    assert!(mesh.is_null());
    assert!(last_error().contains("empty_sketch"));
    let status = unsafe { ps_generate(model, blank.as_ptr(), 0, 256, &mut mesh) };
    assert_eq!(status, PsStatus::InvalidArgument);
    unsafe { ps_model_free(model) };
}

#[test]
fn generate_exposes_consistent_buffers() {
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { ps_model_new_desk(3, 16, &mut model) }, PsStatus::Ok);
    let px = cross_sketch();
    let mut mesh = ptr::null_mut();
    assert_eq!(unsafe { ps_generate(model, px.as_ptr(), 256, 256, &mut mesh) }, PsStatus::Ok);
    let mut presence = [0.0; 8];
    assert_eq!(unsafe { ps_mesh_presence(mesh, presence.as_mut_ptr(), 8) }, 8);
    assert!(presence.iter().all(|p| (0.0..=1.0).contains(p)));
    let nv = unsafe { ps_mesh_vertex_count(mesh) };
    let nf = unsafe { ps_mesh_face_count(mesh) };
    if nf > 0 {
        let faces = unsafe { std::slice::from_raw_parts(ps_mesh_faces(mesh), 3 * nf) };
        assert!(faces.iter().all(|&i| (i as usize) < nv));
        let parts = unsafe { std::slice::from_raw_parts(ps_mesh_face_parts(mesh), nf) };
        assert!(parts.iter().all(|&p| p < 8 && presence[p as usize] > 0.5));
        let verts = unsafe { std::slice::from_raw_parts(ps_mesh_vertices(mesh), 3 * nv) };
        assert!(verts.iter().all(|v| v.is_finite()));
        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("m.obj").to_str().unwrap()).unwrap();
        assert_eq!(unsafe { ps_mesh_write(mesh, path.as_ptr()) }, PsStatus::Ok);
        let mut cd = -1.0;
        assert_eq!(unsafe { ps_mesh_chamfer(mesh, mesh, 500, 1, &mut cd) }, PsStatus::Ok);
        assert!((0.0..1e-2).contains(&cd));
    }
    unsafe {
        ps_mesh_free(mesh);
        ps_model_free(model);
    }
}

#[test]
fn chamfer_of_packed_points() {
    let a = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
    let b = [0.0, 0.0, 1.0];
    let mut cd = 0.0;
    assert_eq!(unsafe { ps_chamfer(a.as_ptr(), 2, b.as_ptr(), 1, &mut cd) }, PsStatus::Ok);
    // a→b: (1 + 2)/2, b→a: 1
    assert!((cd - 2.5).abs() < 1e-12, "{cd}");
    assert_eq!(unsafe { ps_chamfer(a.as_ptr(), 2, ptr::null(), 1, &mut cd) }, PsStatus::NullPointer);
    assert_ne!(unsafe { ps_chamfer(a.as_ptr(), 2, b.as_ptr(), 0, &mut cd) }, PsStatus::Ok);
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/partsketch.h")).unwrap();
    for name in ["ps_model_load", "ps_generate", "ps_mesh_vertices", "ps_chamfer", "ps_last_error", "PS_STATUS_EMPTY_SKETCH"] {
        assert!(header.contains(name), "{name}");
    }
    assert!(!unsafe { CStr::from_ptr(ps_version()) }.to_bytes().is_empty());
}
