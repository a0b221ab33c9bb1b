//! Helpers shared by the acceptance suite.

use std::path::PathBuf;

/// Path of the `hetnet` binary built alongside the running test executable.
///
/// Test executables live in `<target>/<profile>/deps`, binaries one level up.
/// Returns `None` when the binary has not been built, for instance when only
/// this package was compiled.
pub fn hetnet_binary() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let profile_dir = exe.parent()?.parent()?;
    let path = profile_dir.join(format!("hetnet{}", std::env::consts::EXE_SUFFIX));
    path.is_file().then_some(path)
}
