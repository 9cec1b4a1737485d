use std::process::Command;

// Embed the git revision at build time so run manifests can record which
// code produced them. Falls back to "unknown" outside a git checkout.
fn main() {
    let revision = Command::new("git")
        .args(["rev-parse", "--short=12", "HEAD"])
        .output()
        .ok()
        .filter(|out| out.status.success())
        .and_then(|out| String::from_utf8(out.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".to_string());
    println!("cargo:rustc-env=ECORL_GIT_REVISION={revision}");
    println!("cargo:rerun-if-changed=../../.git/HEAD");
}
