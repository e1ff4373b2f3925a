use std::fs;
use std::path::Path;

use fracsing::specfun::asymptotic_constant;
use fracsing::Params;

#[test]
fn asymptotic_constant_matches_high_precision_fixture() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/asymptotic_constants.txt");
    let text = fs::read_to_string(path).unwrap();
    let mut rows = 0;
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let (n, sigma, p): (usize, f64, f64) = (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap());
        let want: f64 = f[3].parse().unwrap();
        let got = asymptotic_constant(&Params::new(n, sigma, p).unwrap()).unwrap();
        let rel = (got - want).abs() / want;
        assert!(rel <= 1e-13, "({n}, {sigma}, {p}): {got} vs {want}, relative {rel:e}");
        rows += 1;
    }
    assert_eq!(rows, 6);
}
