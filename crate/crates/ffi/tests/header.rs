use std::path::Path;
use std::process::Command;

#[test]
fn header_compiles_as_c_and_declares_the_interface() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/sparsepos.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "sps_problem_parse",
        "sps_problem_free",
        "sps_problem_normalize_krivine",
        "sps_solve",
        "sps_result_bound",
        "sps_result_status",
        "sps_result_certificate_json",
        "sps_result_verify",
        "sps_grid_min",
        "sps_string_free",
        "sps_last_error",
        "SPS_STATUS_PANIC",
    ] {
        assert!(text.contains(name), "missing {name}");
    }
    let probe = tempfile_path();
    std::fs::write(&probe, "#include \"sparsepos.h\"\nint main(void) { SpsProblem *p = 0; return (int)sps_problem_parse(\"\", &p); }\n").unwrap();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(&probe)
        .status()
        .expect("a C compiler is required");
    assert!(status.success());
}

fn tempfile_path() -> std::path::PathBuf {
    std::env::temp_dir().join(format!("sparsepos_probe_{}.c", std::process::id()))
}
