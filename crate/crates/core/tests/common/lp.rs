use optval_core::model::MilpInstance;
use optval_core::rng::Rng;

/// Gaussian elimination with partial pivoting on a dense square system.
pub fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let k = b.len();
    for c in 0..k {
        let p = (c..k).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-10 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in 0..k {
            if r != c {
                let f = a[r][c] / a[c][c];
                for cc in c..k {
                    a[r][cc] -= f * a[c][cc];
                }
                b[r] -= f * b[c];
            }
        }
    }
    Some((0..k).map(|i| b[i] / a[i][i]).collect())
}

pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Minimum objective over all basic feasible solutions of
/// `A x − s = b`, `lo ≤ x ≤ up`, `s ≥ 0`, with every nonbasic column at one
/// of its finite bounds. `None` when no vertex is feasible.
pub fn vertex_oracle(inst: &MilpInstance) -> Option<f64> {
    let (n, m) = (inst.num_vars, inst.num_cons);
    let mut dense = vec![vec![0.0; n + m]; m];
    for (i, row) in inst.rows.iter().enumerate() {
        for &(j, a) in row {
            dense[i][j] += a;
        }
        dense[i][n + i] = -1.0;
    }
    let lo = |j: usize| if j < n { inst.var_lower[j] } else { 0.0 };
    let up = |j: usize| if j < n { inst.var_upper[j] } else { f64::INFINITY };
    let mut best: Option<f64> = None;
    for basis in combinations(n + m, m) {
        let nonbasic: Vec<usize> = (0..n + m).filter(|j| !basis.contains(j)).collect();
        let choices: Vec<Vec<f64>> = nonbasic
            .iter()
            .map(|&j| {
                let mut v = vec![lo(j)];
                if up(j).is_finite() && up(j) != lo(j) {
                    v.push(up(j));
                }
                v
            })
            .collect();
        let total: usize = choices.iter().map(Vec::len).product();
        for mut code in 0..total {
            let mut x = vec![0.0; n + m];
            for (slot, &j) in nonbasic.iter().enumerate() {
                let opts = &choices[slot];
                x[j] = opts[code % opts.len()];
                code /= opts.len();
            }
            let rhs: Vec<f64> = (0..m)
                .map(|i| inst.rhs[i] - nonbasic.iter().map(|&j| dense[i][j] * x[j]).sum::<f64>())
                .collect();
            let mat: Vec<Vec<f64>> =
                (0..m).map(|i| basis.iter().map(|&j| dense[i][j]).collect()).collect();
            let Some(sol) = gauss(mat, rhs) else { continue };
            for (p, &j) in basis.iter().enumerate() {
                x[j] = sol[p];
            }
            let feasible = (0..n + m).all(|j| x[j] >= lo(j) - 1e-9 && x[j] <= up(j) + 1e-9);
            if feasible {
                let z: f64 = (0..n).map(|j| inst.obj[j] * x[j]).sum();
                best = Some(best.map_or(z, |b: f64| b.min(z)));
            }
        }
    }
    best
}

pub fn random_lp(rng: &mut Rng, m: usize, n: usize, upper: f64) -> MilpInstance {
    let mut rows: Vec<Vec<(usize, f64)>> = (0..m - 1)
        .map(|_| {
            (0..n)
                .filter_map(|j| {
                    if rng.bernoulli(0.7) {
                        Some((j, rng.int_in(-5, 5) as f64))
                    } else {
                        None
                    }
                })
                .filter(|&(_, a)| a != 0.0)
                .collect::<Vec<_>>()
        })
        .map(|r: Vec<(usize, f64)>| if r.is_empty() { vec![(0, 1.0)] } else { r })
        .collect();
    let mut rhs: Vec<f64> = (0..m - 1).map(|_| rng.int_in(-6, 6) as f64).collect();
    // Box row keeps every instance bounded.
    rows.push((0..n).map(|j| (j, -1.0)).collect());
    rhs.push(-10.0);
    let obj = (0..n).map(|_| rng.int_in(-5, 5) as f64).collect();
    MilpInstance::new("rand", obj, rows, rhs, Vec::new(), vec![0.0; n], vec![upper; n])
}
