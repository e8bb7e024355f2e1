//! Neighbour diffusion for filling holes in sparse grids.

/// Fill cells where `known` is false, in place.
///
/// `planes` holds `C` planes of `h * w` values. Holes are first flooded layer
/// by layer with the mean of already-filled 4-neighbours, then relaxed with
/// `smooth_iters` Jacobi sweeps that only touch the original holes. Returns
/// `false` (leaving `planes` untouched) when no cell is known.
pub(crate) fn diffusion_fill(planes: &mut [f64], channels: usize, h: usize, w: usize, known: &[bool], smooth_iters: usize) -> bool {
    let plane = h * w;
    assert_eq!(planes.len(), channels * plane);
    assert_eq!(known.len(), plane);
    if !known.iter().any(|&k| k) {
        return false;
    }
    if known.iter().all(|&k| k) {
        return true;
    }
    let neighbours = |i: usize| {
        let (y, x) = (i / w, i % w);
        let mut n = [usize::MAX; 4];
        if x > 0 {
            n[0] = i - 1;
        }
        if x + 1 < w {
            n[1] = i + 1;
        }
        if y > 0 {
            n[2] = i - w;
        }
        if y + 1 < h {
            n[3] = i + w;
        }
        n
    };

    let mut filled = known.to_vec();
    let mut pending: Vec<usize> = (0..plane).filter(|&i| !known[i]).collect();
    while !pending.is_empty() {
        let mut layer = Vec::new();
        let mut rest = Vec::new();
        for &i in &pending {
            let mut acc = vec![0.0; channels];
            let mut count = 0;
            for j in neighbours(i).into_iter().filter(|&j| j != usize::MAX && filled[j]) {
                for (c, a) in acc.iter_mut().enumerate() {
                    *a += planes[c * plane + j];
                }
                count += 1;
            }
            if count > 0 {
                layer.push((i, acc.into_iter().map(|a| a / count as f64).collect::<Vec<_>>()));
            } else {
                rest.push(i);
            }
        }
        for (i, vals) in layer {
            for (c, v) in vals.into_iter().enumerate() {
                planes[c * plane + i] = v;
            }
            filled[i] = true;
        }
        pending = rest;
    }

    let holes: Vec<usize> = (0..plane).filter(|&i| !known[i]).collect();
    for _ in 0..smooth_iters {
        let snapshot = planes.to_vec();
        for &i in &holes {
            let nb: Vec<usize> = neighbours(i).into_iter().filter(|&j| j != usize::MAX).collect();
            for c in 0..channels {
                let s: f64 = nb.iter().map(|&j| snapshot[c * plane + j]).sum();
                planes[c * plane + i] = s / nb.len() as f64;
            }
        }
    }
    true
}
