use std::path::Path;
use std::process::Command;

fn header() -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/stbeat.h");
    std::fs::read_to_string(path).expect("header is generated by the build script")
}

fn exported_functions() -> Vec<String> {
    let src = include_str!("../src/lib.rs");
    src.lines()
        .filter_map(|l| {
            let rest = l
                .strip_prefix("pub extern \"C\" fn ")
                .or_else(|| l.strip_prefix("pub unsafe extern \"C\" fn "))?;
            Some(rest.split('(').next().unwrap().to_string())
        })
        .collect()
}

#[test]
fn header_declares_every_export() {
    let h = header();
    let fns = exported_functions();
    assert!(fns.len() >= 15, "found {fns:?}");
    for f in &fns {
        let declared = [" ", "*"].iter().any(|lead| h.contains(&format!("{lead}{f}(")));
        assert!(declared, "{f} missing from header");
    }
}

#[test]
fn header_types() {
    let h = header();
    assert!(h.contains("typedef struct StbeatAnalysis StbeatAnalysis;"));
    assert!(h.contains("typedef struct StbeatConfig {"));
    for code in [
        "STBEAT_STATUS_OK = 0",
        "STBEAT_STATUS_ISOLATION_FAILURE = 1",
        "STBEAT_STATUS_NULL_POINTER = -1",
        "STBEAT_STATUS_INVALID_CONFIG = -2",
        "STBEAT_STATUS_IO = -3",
        "STBEAT_STATUS_DECODE = -4",
        "STBEAT_STATUS_INSUFFICIENT_AUDIO = -5",
        "STBEAT_STATUS_INVALID_INPUT = -6",
        "STBEAT_STATUS_PANIC = -99",
    ] {
        assert!(h.contains(code), "{code} missing");
    }
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"stbeat.h\"\n\
         int main(void) {\n\
           StbeatConfig c = stbeat_config_default();\n\
           StbeatAnalysis *a = 0;\n\
           StbeatStatus s = stbeat_analyze_file(\"x.wav\", &c, &a);\n\
           stbeat_analysis_free(a);\n\
           return s == STBEAT_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    for (compiler, extra) in [("cc", vec!["-std=c99"]), ("c++", vec!["-x", "c++"])] {
        let status = match Command::new(compiler)
            .args(&extra)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-I"])
            .arg(&include)
            .arg(&src)
            .status()
        {
            Ok(s) => s,
            Err(e) => {
                eprintln!("skipping {compiler}: {e}");
                continue;
            }
        };
        assert!(status.success(), "{compiler} rejected the header");
    }
}
