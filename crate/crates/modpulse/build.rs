// Links the system OpenBLAS, which bundles the BLAS/CBLAS/LAPACK symbols
// ndarray-linalg expects; none of the *-src provider crates are needed.
fn main() {
    println!("cargo:rustc-link-lib=dylib=openblas");
}
