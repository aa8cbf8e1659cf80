use std::time::Instant;
use trivolume::bijective::*;
use trivolume::fixtures;
use trivolume::harmonic::harmonic_map;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let depth: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.45);
    let vol = fixtures::dented_cube(3, n, depth);
    let faces = fixtures::faces_of(&vol);
    let h = harmonic_map(&faces, 1e-10).unwrap();
    let t = Instant::now();
    let lambda: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let params = BijectifyParams { delta: 1e-3, lambda, ..Default::default() };
    match bijectify(&h.volume, &params) {
        Ok(out) => {
            println!(
                "n={n} depth={depth}: {:.1?} certified={} calls={} refined={}",
                t.elapsed(),
                out.report.certified,
                out.solver_calls,
                out.refined
            );
            for tr in &out.trace {
                println!("   {tr}");
            }
        }
        Err(e) => println!("n={n} depth={depth}: ERROR after {:.1?}: {e}", t.elapsed()),
    }
}
