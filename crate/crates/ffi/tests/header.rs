use std::path::Path;
use std::process::Command;

const PROGRAM: &str = r#"
#include "wmprop.h"
int main(void) {
    double xs[3] = {0.1, 0.5, 0.9};
    WmEcdf *e = 0;
    double v = 0;
    WmEstimatorConfig cfg = wm_estimator_config_default();
    if (wm_ecdf_new(xs, 3, &e) != WM_STATUS_OK) return 1;
    if (wm_ecdf_query(e, 0.5, &v) != WM_STATUS_OK) return 1;
    wm_ecdf_free(e);
    return cfg.bins == 500 && v > 0.6 && v < 0.7 ? 0 : 1;
}
"#;

/// The generated header compiles as C and C++.
#[test]
fn header_compiles() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/wmprop.h");
    assert!(header.exists());
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    for (compiler, extra) in [("cc", &["-std=c99"][..]), ("c++", &["-x", "c++"][..])] {
        let Ok(out) = Command::new(compiler)
            .args(extra)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-I"])
            .arg(dir.join("include"))
            .arg(&src)
            .output()
        else {
            eprintln!("{compiler} not available; skipping");
            continue;
        };
        assert!(
            out.status.success(),
            "{compiler}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}
