use std::path::PathBuf;

fn main() {
    let dir = PathBuf::from(std::env::var("CARGO_MANIFEST_DIR").expect("manifest dir"));
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
    let config = cbindgen::Config::from_file(dir.join("cbindgen.toml")).expect("cbindgen.toml");
    match cbindgen::generate_with_config(&dir, config) {
        Ok(b) => {
            std::fs::create_dir_all(dir.join("include")).expect("include dir");
            b.write_to_file(dir.join("include/fblab.h"));
        }
        Err(e) => println!("cargo:warning=header generation skipped: {e}"),
    }
}
