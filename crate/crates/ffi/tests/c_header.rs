//! Compiles and runs a small C program against the generated header and
//! the static library. Skipped when no C compiler is on PATH.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "vortexdyn.h"

int main(void) {
    VdnField *f = NULL;
    if (vdn_field_closed_form("single", 1.0, 0.0, 0.0, 8.0, 128, &f) != VDN_STATUS_OK) return 1;
    VdnVortex v[4];
    size_t n = 0;
    if (vdn_detect(f, 4.0, v, 4, &n) != VDN_STATUS_OK || n != 1 || v[0].charge != 1) return 2;
    if (fabs(v[0].x - 1.0) > 0.0625 || fabs(v[0].y) > 0.0625) return 3;
    vdn_field_free(f);

    VdnField *g = NULL;
    if (vdn_field_closed_form("nope", 1.0, 0.0, 0.0, 8.0, 128, &g) != VDN_STATUS_UNKNOWN_FAMILY) return 4;
    char msg[128];
    if (vdn_last_error(msg, sizeof msg) == 0) return 5;
    printf("ok %s\n", msg);
    return 0;
}
"#;

fn compiler() -> Option<String> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
        .map(String::from)
}

#[test]
fn c_program_links_and_runs() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found, skipping");
        return;
    };
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // the test binary lives in target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libvortexdyn_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built, skipping", lib.display());
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("main.c");
    let bin = tmp.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok unknown vortex family"));
}
