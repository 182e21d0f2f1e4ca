use num_complex::Complex64;
use tdheston::specfun::{kummer_m, SeriesPolicy};
#[test]
fn probe_dd_m() {
    let a = Complex64::new(-5.45, -7.84);
    let z = Complex64::new(-5.8, 20.8);
    let v = kummer_m(a, Complex64::new(0.5, 0.0), z, &SeriesPolicy::default()).unwrap();
    let reference = Complex64::new(-9343868069.658931367534810544, -2370274042.455298349567127541);
    println!("got  {v}");
    println!("want {reference}");
    println!("rel  {:.3e}", (v - reference).norm() / reference.norm());
}
