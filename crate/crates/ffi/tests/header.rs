use std::path::PathBuf;
use std::process::Command;

fn header() -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/hmmsense.h");
    std::fs::read_to_string(p).expect("header generated by build script")
}

#[test]
fn header_declares_api() {
    let h = header();
    for name in [
        "typedef struct HmsStack HmsStack;",
        "HMS_STATUS_OK = 0",
        "HMS_STATUS_PANIC",
        "HMS_POLARIZATION_P = 0",
        "typedef struct HmsCoupledModes",
        "hms_last_error(void)",
        "hms_stack_from_config_json(",
        "hms_stack_free(",
        "hms_stack_set_concentration(",
        "hms_reflectance(",
        "hms_reflectance_spectrum(",
        "hms_band_edges(",
        "hms_dye_plasma_frequency(",
        "hms_coupled_modes(",
    ] {
        assert!(h.contains(name), "missing {name}");
    }
    assert!(h.starts_with("#ifndef HMMSENSE_H"));
}

#[test]
fn header_compiles_as_c() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        r#"#include "hmmsense.h"
int main(void) {
    HmsStack *s = 0;
    HmsCoupledModes m;
    double r;
    HmsStatus st = hms_coupled_modes(3.5e15, 1e7, 3.5e15, 1e13, 1e13, &m);
    st = hms_reflectance(s, 500.0, 48.0, HMS_POLARIZATION_P, &r);
    hms_stack_free(s);
    return st == HMS_STATUS_OK ? 0 : (int)st;
}
"#,
    )
    .unwrap();
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .output()
        .expect("C compiler available");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().unwrap().parent().unwrap().join("libhmmsense_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let config = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/configs/kretschmann_r6g.json");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include <stdlib.h>
#include "hmmsense.h"
int main(int argc, char **argv) {
    FILE *f = fopen(argv[1], "rb");
    if (!f) return 10;
    char *buf = calloc(1, 1 << 16);
    fread(buf, 1, (1 << 16) - 1, f);
    fclose(f);
    HmsStack *s = NULL;
    if (hms_stack_from_config_json(buf, NULL, &s) != HMS_STATUS_OK) {
        fprintf(stderr, "%s\n", hms_last_error());
        return 11;
    }
    double enz, enp, r;
    if (hms_band_edges(s, 350.0, 650.0, 1.0, &enz, &enp) != HMS_STATUS_OK) return 12;
    if (hms_reflectance(s, 587.9, 48.0, HMS_POLARIZATION_P, &r) != HMS_STATUS_OK) return 13;
    if (hms_reflectance(s, -1.0, 48.0, HMS_POLARIZATION_P, &r) != HMS_STATUS_INVALID_ARGUMENT) return 14;
    printf("%.2f %.2f %.4f\n", enz, enp, r);
    hms_stack_free(s);
    free(buf);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("main");
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let out = Command::new("cc")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .expect("C compiler available");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).arg(&config).output().unwrap();
    assert!(run.status.success(), "exit {:?}: {}", run.status, String::from_utf8_lossy(&run.stderr));
    let text = String::from_utf8(run.stdout).unwrap();
    let v: Vec<f64> = text.split_whitespace().map(|x| x.parse().unwrap()).collect();
    assert!((v[0] - 414.0).abs() < 0.5 && (v[1] - 513.0).abs() < 0.5, "{text}");
    assert!(v[2] < 0.05, "{text}");
}
