use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(std::env::var("CARGO_MANIFEST_DIR").unwrap());
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
    let config = cbindgen::Config::from_file(crate_dir.join("cbindgen.toml")).expect("read cbindgen.toml");
    match cbindgen::generate_with_config(&crate_dir, config) {
        Ok(bindings) => {
            let include = crate_dir.join("include");
            std::fs::create_dir_all(&include).expect("create include/");
            bindings.write_to_file(include.join("soundmix.h"));
        }
        // Keep builds working when the header cannot be regenerated, e.g.
        // while the source does not parse yet.
        Err(e) => println!("cargo:warning=cbindgen: {e}"),
    }
}
