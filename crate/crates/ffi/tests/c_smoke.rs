//! Compiles and runs the C example against the generated header and the
//! built cdylib. Skips quietly when no C compiler is available.

use std::path::PathBuf;
use std::process::Command;

#[test]
fn c_example_builds_and_runs() {
    let cc = ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().map(|o| o.status.success()).unwrap_or(false));
    let Some(cc) = cc else {
        eprintln!("no C compiler found; skipping the C smoke test");
        return;
    };
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header_dir = manifest.join("include");
    if !header_dir.join("neckflow.h").exists() {
        eprintln!("header not generated; skipping");
        return;
    }
    // target/debug is two levels up from the test executable in deps/
    let exe = std::env::current_exe().unwrap();
    let libdir = exe.parent().unwrap().parent().unwrap().to_path_buf();
    if !libdir.join("libneckflow_ffi.so").exists() && !libdir.join("libneckflow_ffi.dylib").exists()
    {
        eprintln!("cdylib not present in {}; skipping", libdir.display());
        return;
    }
    let out = std::env::temp_dir().join(format!("neckflow-c-smoke-{}", std::process::id()));
    let status = Command::new(cc)
        .arg("-std=c99")
        .arg("-I")
        .arg(&header_dir)
        .arg(manifest.join("examples/smoke.c"))
        .arg("-L")
        .arg(&libdir)
        .arg("-lneckflow_ffi")
        .arg("-lm")
        .arg("-o")
        .arg(&out)
        .status()
        .expect("compiler invocation");
    assert!(status.success(), "C compilation failed");
    let run = Command::new(&out)
        .env("LD_LIBRARY_PATH", &libdir)
        .output()
        .expect("running the C smoke binary");
    assert!(
        run.status.success(),
        "C smoke exited with {:?}: {}",
        run.status.code(),
        String::from_utf8_lossy(&run.stdout)
    );
    let _ = std::fs::remove_file(&out);
}
