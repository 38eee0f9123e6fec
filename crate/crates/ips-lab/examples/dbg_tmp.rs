use ips_lab::oracle::*;
fn main() {
    for cap in [30u32, 45, 60, 80, 100, 120] {
        println!("cap {cap}: bound {:.3e}", cap_exceedance_bound(2, 1.0, 1.0, cap));
    }
    println!("certified: {}", certified_cap(2, 1.0, 1.0, 1e-10));
    for &(b, t) in &[(0.5f64, 0.5f64), (1.0, 1.0), (2.0, 0.5), (0.0, 1.5), (1.0, 1.0), (1.0, 2.0)] {
        let cap = certified_cap(2, b, t, 1e-10);
        println!("b={b} t={t}: certified cap {cap}, states {}", (cap as u64 + 1).pow(2));
    }
}
