// Scratch debugging harness (deleted before release).
use ndarray::Array2;
use otfs::data::{squared_euclidean_cost, zscore, CostMatrix, DataMatrix, EmpiricalMeasure};

fn main() {
    // Rebuild the failing feature-OT instance from the shuffled-column test.
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let n = 40;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let base = next();
            vec![
                base * 3.0,
                next() + if i % 2 == 0 { 2.0 } else { -2.0 },
                next() * 4.0 - 2.0,
                next() + base,
            ]
        })
        .collect();
    let s = DataMatrix::from_rows(&rows).unwrap();
    let mut shuffled = rows.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = ((next() * (i + 1) as f64) as usize).min(i);
        perm.swap(i, j);
    }
    for i in 0..n {
        shuffled[i][2] = rows[perm[i]][2];
    }
    let t = DataMatrix::from_rows(&shuffled).unwrap();

    let t_u = otfs::featsel::select_target_samples(&s, &t, otfs::SelectionStrategy::ExactOt).unwrap();
    let sf = zscore(&s.transposed()).unwrap();
    let tf = zscore(&t_u.transposed()).unwrap();
    let cost = squared_euclidean_cost(&sf, &tf).unwrap();
    println!("cost max {}", cost.max_value());
    println!("cost:\n{:0.2}", cost.values());

    // Manual scaling-domain Sinkhorn with verbose error trace.
    let lambda = 1.0;
    let d = 4usize;
    let a = EmpiricalMeasure::uniform(d).unwrap();
    let kernel: Array2<f64> = cost.values().mapv(|c| (-lambda * c).exp());
    let mut u = ndarray::Array1::<f64>::ones(d);
    let mut v = ndarray::Array1::<f64>::ones(d);
    for it in 0..20000 {
        let kv = kernel.dot(&v);
        let mut err = 0.0f64;
        for i in 0..d {
            err = err.max((u[i] * kv[i] - a.as_slice()[i]).abs());
        }
        if it % 1000 == 0 || err < 1e-9 {
            println!("iter {} err {:e}  u range [{:e}, {:e}] v range [{:e}, {:e}]",
                it, err,
                u.iter().cloned().fold(f64::INFINITY, f64::min),
                u.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                v.iter().cloned().fold(f64::INFINITY, f64::min),
                v.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
            if err < 1e-9 { break; }
        }
        for i in 0..d {
            u[i] = a.as_slice()[i] / kv[i];
        }
        let ktu = kernel.t().dot(&u);
        for j in 0..d {
            v[j] = a.as_slice()[j] / ktu[j];
        }
    }
    let _ = CostMatrix::new(Array2::zeros((1, 1))).unwrap();
}
