//! Exact combinatorial references for partition agreement scores.

pub fn binom(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

/// `E[MI]` with exact integer hypergeometric weights.
pub fn emi_oracle(rows: &[u64], cols: &[u64], n: u64) -> f64 {
    let nf = n as f64;
    let mut total = 0.0;
    for &a in rows {
        for &b in cols {
            let denom = binom(n, b);
            for nij in 1..=a.min(b) {
                let ways = binom(a, nij) * binom(n - a, b - nij);
                if ways == 0 {
                    continue;
                }
                let x = nij as f64;
                total += x / nf * (nf * x / (a * b) as f64).ln() * (ways as f64 / denom as f64);
            }
        }
    }
    total
}

pub fn entropy_of(counts: impl Iterator<Item = u64>, n: f64) -> f64 {
    counts.filter(|&c| c > 0).map(|c| c as f64 / n).map(|p| -p * p.ln()).sum()
}

/// `H(a) + H(b) − H(a, b)`.
pub fn mi_oracle(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let count = |keys: Vec<(usize, usize)>| {
        let mut m = std::collections::BTreeMap::new();
        for k in keys {
            *m.entry(k).or_insert(0u64) += 1;
        }
        m.into_values().collect::<Vec<_>>()
    };
    let ha = entropy_of(count(a.iter().map(|&x| (x, 0)).collect()).into_iter(), n);
    let hb = entropy_of(count(b.iter().map(|&x| (x, 0)).collect()).into_iter(), n);
    let hab = entropy_of(count(a.iter().zip(b).map(|(&x, &y)| (x, y)).collect()).into_iter(), n);
    ha + hb - hab
}

pub fn sizes(labels: &[usize]) -> Vec<u64> {
    let mut s = vec![0u64; labels.iter().max().map_or(0, |m| m + 1)];
    for &l in labels {
        s[l] += 1;
    }
    s.retain(|&c| c > 0);
    s
}

pub fn ami_oracle(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as u64;
    let (ra, rb) = (sizes(a), sizes(b));
    let emi = emi_oracle(&ra, &rb, n);
    let mean_h = 0.5 * (entropy_of(ra.into_iter(), n as f64) + entropy_of(rb.into_iter(), n as f64));
    (mi_oracle(a, b) - emi) / (mean_h - emi)
}

/// Every set partition of `0..n` as restricted growth strings.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, n: usize, max: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for v in 0..=max + 1 {
            prefix.push(v);
            rec(prefix, n, max.max(v), out);
            prefix.pop();
        }
    }
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    rec(&mut vec![0], n, 0, &mut out);
    out
}

/// Integer partitions of `n`, largest part first.
pub fn integer_partitions(n: u64, max: u64) -> Vec<Vec<u64>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for first in (1..=n.min(max)).rev() {
        for mut rest in integer_partitions(n - first, first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

pub fn labels_from_sizes(sizes: &[u64]) -> Vec<usize> {
    sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s as usize)).collect()
}

/// Average MI over every relabeling permutation of the second labeling.
pub fn emi_by_permutation(a: &[usize], b: &[usize]) -> f64 {
    let n = b.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    let mut sum = 0.0;
    let mut count = 0u64;
    let eval = |p: &[usize]| {
        let shuffled: Vec<usize> = p.iter().map(|&i| b[i]).collect();
        mi_oracle(a, &shuffled)
    };
    sum += eval(&perm);
    count += 1;
    // Heap's algorithm.
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            sum += eval(&perm);
            count += 1;
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    sum / count as f64
}

/// ARI straight from pair counting.
pub fn ari_oracle(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut both, mut in_a, mut in_b) = (0f64, 0f64, 0f64);
    for i in 0..n {
        for j in i + 1..n {
            let sa = a[i] == a[j];
            let sb = b[i] == b[j];
            both += (sa && sb) as u8 as f64;
            in_a += sa as u8 as f64;
            in_b += sb as u8 as f64;
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    let expected = in_a * in_b / pairs;
    let max = 0.5 * (in_a + in_b);
    (both - expected) / (max - expected)
}
