//! Compile and run a small C program against the generated header and the
//! static library, so header syntax errors or ABI drift fail the suite.

use std::path::PathBuf;
use std::process::Command;

fn target_dir() -> PathBuf {
    let profile = if cfg!(debug_assertions) { "debug" } else { "release" };
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../target")
        .join(profile)
}

#[test]
fn c_program_links_and_runs() {
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let lib = target_dir().join("libpinn_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());

    let dir = std::env::temp_dir().join("pinn-ffi-c-test");
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include <math.h>
#include "pinn.h"

int main(void) {
    double u = 0.0;
    if (pinn_burgers_exact(0.0, 0.3, 0.0031830988618379067, &u) != PinnStatus_Ok) return 1;
    if (fabs(u + sin(M_PI * 0.3)) > 1e-12) return 2;

    struct PinnTableau *t = NULL;
    if (pinn_tableau_new(2, &t) != PinnStatus_Ok) return 3;
    double b[2];
    if (pinn_tableau_coefficients(t, NULL, b, NULL) != PinnStatus_Ok) return 4;
    if (fabs(b[0] - 0.5) > 1e-12) return 5;
    pinn_tableau_free(t);

    size_t q = 0;
    if (pinn_choose_q(2.220446e-16, 0.8, &q) != PinnStatus_Ok || q != 81) return 6;

    if (pinn_tableau_new(0, &t) == PinnStatus_Ok) return 7;
    char msg[128];
    if (pinn_last_error(msg, sizeof msg) == 0) return 8;
    printf("ok: %s\n", pinn_version());
    return 0;
}
"#,
    )
    .unwrap();

    let exe = dir.join("smoke");
    let compile = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .output()
        .expect("cc not available");
    assert!(
        compile.status.success(),
        "cc failed:\n{}",
        String::from_utf8_lossy(&compile.stderr)
    );
    let run = Command::new(&exe).output().unwrap();
    assert!(
        run.status.success(),
        "smoke test exited with {:?}: {}",
        run.status.code(),
        String::from_utf8_lossy(&run.stdout)
    );
}
