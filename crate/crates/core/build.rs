// Link LAPACK/BLAS from the system OpenBLAS build, which bundles the CBLAS
// and LAPACK interfaces that `ndarray-linalg` expects a backend to provide.
fn main() {
    println!("cargo:rustc-link-lib=dylib=openblas");
}
