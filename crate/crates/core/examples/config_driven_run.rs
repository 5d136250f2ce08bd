//! Running from a TOML configuration, as the `projsol solve` command does.
//! Pass a path to use your own file; otherwise `affine_box.toml` is used.

use std::path::PathBuf;

use projsol::cli::{load_config, run_command};

fn main() {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/affine_box.toml"));
    let spec = load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let code = run_command(&spec, &mut std::io::stdout()).expect("run");
    println!("exit status {code}");
}
