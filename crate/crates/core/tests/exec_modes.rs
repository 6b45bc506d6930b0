//! Sequential and parallel execution must produce identical bytes.

use std::fs;
use std::path::Path;

use specalloc::config::RunConfig;
use specalloc::dataset::pipeline;
use specalloc::exec::Exec;

fn run() -> RunConfig {
    let mut run = RunConfig::default();
    run.set_seed(77);
    run.sampler.n_sensors = 36;
    run.sheets.image_px = 32;
    run.propagation.fading_amplitude_db = 1.0;
    run
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn staged(exec: Exec) -> Vec<(String, Vec<u8>)> {
    let dir = tempfile::tempdir().unwrap();
    let r = run();
    pipeline::generate(dir.path(), &r, 20, exec).unwrap();
    pipeline::label(dir.path(), &r, exec).unwrap();
    pipeline::encode(dir.path(), &r, exec).unwrap();
    pipeline::multisu(dir.path(), &r, exec).unwrap();
    snapshot(dir.path())
}

#[test]
fn staged_pipeline_is_mode_independent() {
    let a = staged(Exec::Sequential);
    let b = staged(Exec::Parallel);
    assert_eq!(a.len(), b.len());
    for ((na, da), (nb, db)) in a.iter().zip(&b) {
        assert_eq!(na, nb);
        assert!(da == db, "{na} differs");
    }
}

#[test]
fn streamed_pretraining_is_mode_independent() {
    let r = run();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline::pretrain(a.path(), &r, 300, Exec::Sequential).unwrap();
    pipeline::pretrain(b.path(), &r, 300, Exec::Parallel).unwrap();
    assert!(snapshot(a.path()) == snapshot(b.path()));
}
