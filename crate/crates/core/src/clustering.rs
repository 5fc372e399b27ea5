//! Agglomerative clustering, elbow selection of the cluster count, and
//! extraction of one summary word per cluster.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{euclidean, squared_euclidean, MatDense};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    /// Euclidean distance between cluster centroids.
    #[default]
    Centroid,
    /// Ward's minimum-variance criterion, scaled like scipy's `ward`.
    Ward,
    /// Mean pairwise Euclidean distance between members.
    Average,
}

/// One merge step. Node ids follow the scipy convention: leaves are
/// `0..n`, the cluster formed by merge `t` is `n + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n: usize,
    pub linkage: Linkage,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let tree: Dendrogram = serde_json::from_str(text)?;
        if tree.n == 0 || tree.merges.len() + 1 != tree.n {
            return Err(Error::ShapeMismatch(format!(
                "{} merges for {} leaves",
                tree.merges.len(),
                tree.n
            )));
        }
        let mut used = vec![false; 2 * tree.n - 1];
        for (t, m) in tree.merges.iter().enumerate() {
            for id in [m.left, m.right] {
                if id >= tree.n + t || std::mem::replace(&mut used[id], true) {
                    return Err(Error::ShapeMismatch(format!("merge {t} reuses or forward-references node {id}")));
                }
            }
        }
        Ok(tree)
    }
}

/// Merges the closest pair of active clusters until one remains.
///
/// Each active cluster lives in the slot of its smallest leaf index. Among
/// pairs at equal linkage distance the lexicographically smallest slot pair
/// wins. Every slot caches its nearest neighbour among higher slots, so a
/// step costs `O(n)` plus rescans of the slots whose cached neighbour moved.
pub fn agglomerate(coords: &MatDense, linkage: Linkage) -> Result<Dendrogram> {
    let n = coords.rows();
    if n < 2 {
        return Err(Error::TooFewPoints(n));
    }
    let dim = coords.cols();
    let mut dist: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| (0..n).map(move |j| euclidean(coords.row(i), coords.row(j))))
        .collect();
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut sums = coords.as_slice().to_vec();
    let mut node = (0..n).collect::<Vec<_>>();
    let mut nn = vec![usize::MAX; n];
    let mut nnd = vec![f64::INFINITY; n];

    let rescan = |k: usize, dist: &[f64], active: &[bool], nn: &mut [usize], nnd: &mut [f64]| {
        nn[k] = usize::MAX;
        nnd[k] = f64::INFINITY;
        for j in (k + 1)..active.len() {
            if active[j] && dist[k * n + j] < nnd[k] {
                nnd[k] = dist[k * n + j];
                nn[k] = j;
            }
        }
    };
    for k in 0..n {
        rescan(k, &dist, &active, &mut nn, &mut nnd);
    }

    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let mut i = usize::MAX;
        for k in 0..n {
            if active[k] && nn[k] != usize::MAX && (i == usize::MAX || nnd[k] < nnd[i]) {
                i = k;
            }
        }
        let j = nn[i];
        let height = nnd[i];
        let merged_size = size[i] + size[j];
        merges.push(Merge {
            left: node[i].min(node[j]),
            right: node[i].max(node[j]),
            height,
            size: merged_size,
        });

        for d in 0..dim {
            sums[i * dim + d] += sums[j * dim + d];
        }
        let (ni, nj) = (size[i] as f64, size[j] as f64);
        active[j] = false;
        size[i] = merged_size;
        node[i] = n + step;

        let centroid = |s: &[f64], k: usize, sz: usize| -> Vec<f64> {
            s[k * dim..(k + 1) * dim].iter().map(|v| v / sz as f64).collect()
        };
        let ci = centroid(&sums, i, size[i]);
        for k in 0..n {
            if !active[k] || k == i {
                continue;
            }
            let d = match linkage {
                Linkage::Centroid => euclidean(&ci, &centroid(&sums, k, size[k])),
                Linkage::Ward => {
                    let (a, b) = (size[i] as f64, size[k] as f64);
                    (2.0 * a * b / (a + b)).sqrt() * euclidean(&ci, &centroid(&sums, k, size[k]))
                }
                Linkage::Average => (ni * dist[i * n + k] + nj * dist[j * n + k]) / (ni + nj),
            };
            dist[i * n + k] = d;
            dist[k * n + i] = d;
        }

        rescan(i, &dist, &active, &mut nn, &mut nnd);
        for k in 0..n {
            if !active[k] || k == i {
                continue;
            }
            if nn[k] == i || nn[k] == j {
                rescan(k, &dist, &active, &mut nn, &mut nnd);
            } else if k < i {
                let d = dist[k * n + i];
                if d < nnd[k] || (d == nnd[k] && i < nn[k]) {
                    nnd[k] = d;
                    nn[k] = i;
                }
            }
        }
    }
    Ok(Dendrogram { n, linkage, merges })
}

/// A flat partition with cluster ids ordered by smallest member index.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub k: usize,
    pub assignment: Vec<usize>,
    pub centroids: MatDense,
}

impl Clustering {
    pub fn from_assignment(assignment: Vec<usize>, coords: &MatDense) -> Result<Self> {
        if assignment.len() != coords.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} points",
                assignment.len(),
                coords.rows()
            )));
        }
        let k = assignment.iter().max().map_or(0, |m| m + 1);
        let dim = coords.cols();
        let mut centroids = MatDense::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for (row, &c) in coords.row_iter().zip(&assignment) {
            counts[c] += 1;
            for (acc, v) in centroids.row_mut(c).iter_mut().zip(row) {
                *acc += v;
            }
        }
        if let Some(c) = counts.iter().position(|&m| m == 0) {
            return Err(Error::InvalidParameter(format!("cluster {c} is empty")));
        }
        for (c, &m) in counts.iter().enumerate() {
            centroids.row_mut(c).iter_mut().for_each(|v| *v /= m as f64);
        }
        Ok(Clustering {
            k,
            assignment,
            centroids,
        })
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == cluster)
            .collect()
    }

    /// Within-cluster sum of squared distances to the centroids.
    pub fn distortion(&self, coords: &MatDense) -> f64 {
        coords
            .row_iter()
            .zip(&self.assignment)
            .map(|(row, &c)| squared_euclidean(row, self.centroids.row(c)))
            .sum()
    }

    pub fn to_tsv(&self, tokens: &[String]) -> String {
        let mut out = String::from("token\tcluster\n");
        for (t, c) in tokens.iter().zip(&self.assignment) {
            out.push_str(&format!("{t}\t{c}\n"));
        }
        out
    }
}

/// Leaf labels after undoing the last `k - 1` merges.
pub fn cut_labels(tree: &Dendrogram, k: usize) -> Result<Vec<usize>> {
    let n = tree.n;
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    // any leaf inside each node
    let mut leaf_of: Vec<usize> = (0..n).collect();
    for m in &tree.merges[..n - k] {
        let (a, b) = (find(&mut parent, leaf_of[m.left]), find(&mut parent, leaf_of[m.right]));
        let (lo, hi) = (a.min(b), a.max(b));
        parent[hi] = lo;
        leaf_of.push(lo);
    }
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut out = vec![0; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if label[r] == usize::MAX {
            label[r] = next;
            next += 1;
        }
        out[i] = label[r];
    }
    Ok(out)
}

pub fn cut(tree: &Dendrogram, coords: &MatDense, k: usize) -> Result<Clustering> {
    if coords.rows() != tree.n {
        return Err(Error::ShapeMismatch(format!(
            "dendrogram has {} leaves, coordinates have {} rows",
            tree.n,
            coords.rows()
        )));
    }
    Clustering::from_assignment(cut_labels(tree, k)?, coords)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionCurve {
    /// `(k, distortion)` sorted by `k`.
    pub points: Vec<(usize, f64)>,
}

impl DistortionCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,distortion\n");
        for (k, d) in &self.points {
            out.push_str(&format!("{k},{d:?}\n"));
        }
        out
    }
}

/// Clamps the default `2..=40` sweep to what `n` points allow.
pub fn default_k_range(n: usize) -> Vec<usize> {
    (2..=40.min(n)).collect()
}

pub fn distortion_curve(tree: &Dendrogram, coords: &MatDense, ks: &[usize]) -> Result<DistortionCurve> {
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let points = ks
        .par_iter()
        .map(|&k| cut(tree, coords, k).map(|c| (k, c.distortion(coords))))
        .collect::<Result<Vec<_>>>()?;
    Ok(DistortionCurve { points })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Elbow {
    pub k: usize,
    /// Normalized distance of the knee below the endpoint chord.
    pub score: f64,
    /// The curve is (numerically) a straight line; `k` is its smallest value.
    pub degenerate: bool,
}

const ELBOW_TIE: f64 = 1e-9;

/// Kneedle on a decreasing curve: rescale both axes to `[0, 1]` and pick the
/// point furthest below the chord joining the endpoints.
pub fn find_elbow(curve: &DistortionCurve) -> Result<Elbow> {
    let mut pts = curve.points.clone();
    pts.sort_by_key(|p| p.0);
    if pts.len() < 4 {
        return Err(Error::CurveTooShort(pts.len()));
    }
    let (k0, y0) = pts[0];
    let (k1, y1) = pts[pts.len() - 1];
    if !(y1 < y0) {
        return Err(Error::NonDecreasingCurve);
    }
    let (kspan, yspan) = ((k1 - k0) as f64, y0 - y1);
    let mut best = (pts[0].0, f64::NEG_INFINITY);
    for &(k, y) in &pts {
        let x = (k - k0) as f64 / kspan;
        let yn = (y - y1) / yspan;
        let diff = (1.0 - x) - yn;
        if diff > best.1 + ELBOW_TIE {
            best = (k, diff);
        }
    }
    Ok(Elbow {
        k: best.0,
        score: best.1,
        degenerate: best.1 <= ELBOW_TIE,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SummaryMode {
    /// Member closest to the cluster centroid.
    #[default]
    CentroidMedoid,
    /// Member closest to the coordinate-wise median of the cluster.
    MedianMedoid,
}

/// One representative token per cluster, in cluster-id order. Distance
/// ties go to the lexicographically smaller token.
pub fn summarize(clustering: &Clustering, coords: &MatDense, tokens: &[String], mode: SummaryMode) -> Result<Vec<String>> {
    if tokens.len() != coords.rows() || clustering.assignment.len() != coords.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{} tokens, {} rows, {} labels",
            tokens.len(),
            coords.rows(),
            clustering.assignment.len()
        )));
    }
    let mut out = Vec::with_capacity(clustering.k);
    for c in 0..clustering.k {
        let members = clustering.members(c);
        let target = match mode {
            SummaryMode::CentroidMedoid => clustering.centroids.row(c).to_vec(),
            SummaryMode::MedianMedoid => coordinate_median(coords, &members),
        };
        let mut best: Option<(f64, &String)> = None;
        for &i in &members {
            let d = squared_euclidean(coords.row(i), &target);
            best = match best {
                Some((bd, bt)) if bd < d || (bd == d && bt <= &tokens[i]) => Some((bd, bt)),
                _ => Some((d, &tokens[i])),
            };
        }
        out.push(best.map(|b| b.1.clone()).ok_or(Error::InvalidParameter(format!("cluster {c} is empty")))?);
    }
    Ok(out)
}

fn coordinate_median(coords: &MatDense, members: &[usize]) -> Vec<f64> {
    (0..coords.cols())
        .map(|d| {
            let mut v: Vec<f64> = members.iter().map(|&i| coords.get(i, d)).collect();
            v.sort_by(f64::total_cmp);
            let m = v.len() / 2;
            if v.len() % 2 == 1 {
                v[m]
            } else {
                (v[m - 1] + v[m]) / 2.0
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(xs: &[f64]) -> MatDense {
        MatDense::new(xs.len(), 1, xs.to_vec()).unwrap()
    }

    fn toks(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("t{i:02}")).collect()
    }

    #[test]
    fn four_point_fixture() {
        let x = line(&[0.0, 0.1, 10.0, 10.1]);
        for linkage in [Linkage::Centroid, Linkage::Ward, Linkage::Average] {
            let t = agglomerate(&x, linkage).unwrap();
            // 10.1 - 10 rounds below 0.1, so either pair may go first
            let mut first: Vec<(usize, usize)> = t.merges[..2].iter().map(|m| (m.left, m.right)).collect();
            first.sort();
            assert_eq!(first, [(0, 1), (2, 3)]);
            assert_eq!((t.merges[2].left, t.merges[2].right), (4, 5));
            assert_eq!(t.merges[2].size, 4);
        }
        let t = agglomerate(&x, Linkage::Centroid).unwrap();
        assert!((t.merges[2].height - 10.0).abs() < 1e-12);
        assert_eq!(cut_labels(&t, 2).unwrap(), [0, 0, 1, 1]);
        assert_eq!(cut_labels(&t, 1).unwrap(), [0, 0, 0, 0]);
        assert_eq!(cut_labels(&t, 4).unwrap(), [0, 1, 2, 3]);
        assert!(matches!(cut_labels(&t, 5), Err(Error::KOutOfRange { k: 5, n: 4 })));
        assert!(matches!(cut_labels(&t, 0), Err(Error::KOutOfRange { .. })));
    }

    #[test]
    fn distortion_by_hand() {
        let x = line(&[0.0, 0.1, 10.0, 10.1]);
        let t = agglomerate(&x, Linkage::Centroid).unwrap();
        let c = distortion_curve(&t, &x, &[4, 1, 2, 3]).unwrap();
        let ks: Vec<usize> = c.points.iter().map(|p| p.0).collect();
        assert_eq!(ks, [1, 2, 3, 4]);
        // k=1: mean 5.05, squared deviations 25.5025+24.5025+24.5025+25.5025
        assert!((c.points[0].1 - 100.01).abs() < 1e-9);
        // k=2: each pair contributes 2 * 0.05^2
        assert!((c.points[1].1 - 0.01).abs() < 1e-12);
        assert!((c.points[2].1 - 0.005).abs() < 1e-12);
        assert_eq!(c.points[3].1, 0.0);
    }

    #[test]
    fn two_points_and_too_few() {
        let t = agglomerate(&MatDense::from_rows(&[[0.0, 0.0], [3.0, 4.0]]).unwrap(), Linkage::Average).unwrap();
        assert_eq!(t.merges.len(), 1);
        assert_eq!(t.merges[0].height, 5.0);
        assert!(matches!(agglomerate(&line(&[1.0]), Linkage::Centroid), Err(Error::TooFewPoints(1))));
    }

    #[test]
    fn equal_distances_take_lowest_pair() {
        let t = agglomerate(&line(&[0.0, 1.0, 2.0, 3.0]), Linkage::Average).unwrap();
        assert_eq!((t.merges[0].left, t.merges[0].right), (0, 1));
        assert_eq!((t.merges[1].left, t.merges[1].right), (2, 3));
    }

    /// Recomputes every linkage distance from member lists at each step.
    fn oracle(x: &MatDense, linkage: Linkage) -> Vec<(Vec<usize>, Vec<usize>)> {
        let mut clusters: Vec<Vec<usize>> = (0..x.rows()).map(|i| vec![i]).collect();
        let mean = |c: &[usize]| -> Vec<f64> {
            (0..x.cols()).map(|d| c.iter().map(|&i| x.get(i, d)).sum::<f64>() / c.len() as f64).collect()
        };
        let link = |a: &[usize], b: &[usize]| -> f64 {
            match linkage {
                Linkage::Centroid => euclidean(&mean(a), &mean(b)),
                Linkage::Ward => {
                    let (p, q) = (a.len() as f64, b.len() as f64);
                    (2.0 * p * q / (p + q)).sqrt() * euclidean(&mean(a), &mean(b))
                }
                Linkage::Average => {
                    let mut s = 0.0;
                    for &i in a {
                        for &j in b {
                            s += euclidean(x.row(i), x.row(j));
                        }
                    }
                    s / (a.len() * b.len()) as f64
                }
            }
        };
        let mut out = Vec::new();
        while clusters.len() > 1 {
            clusters.sort_by_key(|c| c[0]);
            let mut best = (f64::INFINITY, 0, 0);
            for i in 0..clusters.len() {
                for j in i + 1..clusters.len() {
                    let d = link(&clusters[i], &clusters[j]);
                    if d < best.0 {
                        best = (d, i, j);
                    }
                }
            }
            let b = clusters.remove(best.2);
            let a = clusters[best.1].clone();
            out.push((a.clone(), b.clone()));
            clusters[best.1].extend(b);
            clusters[best.1].sort();
        }
        out
    }

    fn members_of(tree: &Dendrogram, id: usize) -> Vec<usize> {
        if id < tree.n {
            return vec![id];
        }
        let m = tree.merges[id - tree.n];
        let mut v = members_of(tree, m.left);
        v.extend(members_of(tree, m.right));
        v.sort();
        v
    }

    #[test]
    fn matches_cubic_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let rows: Vec<[f64; 2]> = (0..12).map(|_| [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
            let x = MatDense::from_rows(&rows).unwrap();
            for linkage in [Linkage::Centroid, Linkage::Ward, Linkage::Average] {
                let tree = agglomerate(&x, linkage).unwrap();
                let want = oracle(&x, linkage);
                for (m, (a, b)) in tree.merges.iter().zip(&want) {
                    let (l, r) = (members_of(&tree, m.left), members_of(&tree, m.right));
                    let got = if l[0] < r[0] { (l, r) } else { (r, l) };
                    assert_eq!(&got, &(a.clone(), b.clone()), "{linkage:?}");
                }
            }
        }
    }

    #[test]
    fn ward_heights_are_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<[f64; 3]> = (0..60).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
        let t = agglomerate(&MatDense::from_rows(&rows).unwrap(), Linkage::Ward).unwrap();
        assert!(t.merges.windows(2).all(|w| w[1].height >= w[0].height));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let t = agglomerate(&line(&[0.0, 0.1, 10.0, 10.1]), Linkage::Centroid).unwrap();
        assert_eq!(Dendrogram::from_json(&t.to_json().unwrap()).unwrap(), t);
        let mut bad = t.clone();
        bad.merges[2].left = 0;
        assert!(Dendrogram::from_json(&serde_json::to_string(&bad).unwrap()).is_err());
    }

    #[test]
    fn elbow_on_hyperbola_and_line() {
        let curve = DistortionCurve { points: (1..=30).map(|k| (k, 1.0 / k as f64)).collect() };
        let e = find_elbow(&curve).unwrap();
        assert_eq!(e.k, 5);
        assert!(!e.degenerate);

        let line = DistortionCurve { points: (1..=10).map(|k| (k, 10.0 - k as f64)).collect() };
        let e = find_elbow(&line).unwrap();
        assert_eq!(e.k, 1);
        assert!(e.degenerate);
    }

    #[test]
    fn elbow_on_single_breakpoint() {
        // steep until k=14, nearly flat afterwards
        let points = (2..=40)
            .map(|k| {
                let y = if k <= 14 { 100.0 - 6.0 * (k - 2) as f64 } else { 28.0 - 0.5 * (k - 14) as f64 };
                (k, y)
            })
            .collect();
        assert_eq!(find_elbow(&DistortionCurve { points }).unwrap().k, 14);
    }

    #[test]
    fn elbow_errors() {
        let short = DistortionCurve { points: vec![(1, 3.0), (2, 2.0), (3, 1.0)] };
        assert!(matches!(find_elbow(&short), Err(Error::CurveTooShort(3))));
        let up = DistortionCurve { points: (1..=5).map(|k| (k, k as f64)).collect() };
        assert!(matches!(find_elbow(&up), Err(Error::NonDecreasingCurve)));
    }

    #[test]
    fn summary_examples() {
        let x = line(&[0.0, 1.0, 2.0, 7.0]);
        let tokens: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let c = Clustering::from_assignment(vec![0, 0, 0, 1], &x).unwrap();
        assert_eq!(summarize(&c, &x, &tokens, SummaryMode::CentroidMedoid).unwrap(), ["b", "d"]);
        assert_eq!(summarize(&c, &x, &tokens, SummaryMode::MedianMedoid).unwrap(), ["b", "d"]);

        // equidistant members: lexicographically smaller token wins
        let x = line(&[0.0, 2.0]);
        let tokens = vec!["zeta".to_string(), "alpha".to_string()];
        let c = Clustering::from_assignment(vec![0, 0], &x).unwrap();
        assert_eq!(summarize(&c, &x, &tokens, SummaryMode::CentroidMedoid).unwrap(), ["alpha"]);

        // median and centroid disagree on a skewed cluster
        let x = line(&[0.0, 1.0, 2.0, 3.0, 100.0]);
        let c = Clustering::from_assignment(vec![0; 5], &x).unwrap();
        let t = toks(5);
        assert_eq!(summarize(&c, &x, &t, SummaryMode::CentroidMedoid).unwrap(), ["t03"]);
        assert_eq!(summarize(&c, &x, &t, SummaryMode::MedianMedoid).unwrap(), ["t02"]);
    }

    #[test]
    fn blobs_are_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut rows = Vec::new();
        for b in 0..4 {
            for _ in 0..15 {
                rows.push([b as f64 * 10.0 + rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)]);
            }
        }
        let x = MatDense::from_rows(&rows).unwrap();
        for linkage in [Linkage::Centroid, Linkage::Ward, Linkage::Average] {
            let labels = cut_labels(&agglomerate(&x, linkage).unwrap(), 4).unwrap();
            let want: Vec<usize> = (0..60).map(|i| i / 15).collect();
            assert_eq!(labels, want);
        }
    }

    fn points() -> impl Strategy<Value = MatDense> {
        (3usize..16).prop_flat_map(|n| {
            prop::collection::vec(-5.0f64..5.0, n * 2).prop_map(move |v| MatDense::new(n, 2, v).unwrap())
        })
    }

    fn partition_sets(labels: &[usize]) -> Vec<Vec<usize>> {
        let k = labels.iter().max().unwrap() + 1;
        (0..k).map(|c| (0..labels.len()).filter(|&i| labels[i] == c).collect()).collect()
    }

    proptest! {
        #[test]
        fn cuts_are_nested_and_distortion_decreases(x in points(), linkage in prop_oneof![
            Just(Linkage::Centroid), Just(Linkage::Ward), Just(Linkage::Average)
        ]) {
            let n = x.rows();
            let tree = agglomerate(&x, linkage).unwrap();
            let ks: Vec<usize> = (1..=n).collect();
            let curve = distortion_curve(&tree, &x, &ks).unwrap();
            prop_assert!(curve.points.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-9));
            prop_assert!(curve.points[n - 1].1.abs() < 1e-12);
            for k in 2..=n {
                let coarse = cut_labels(&tree, k - 1).unwrap();
                let fine = cut_labels(&tree, k).unwrap();
                // every fine cluster sits inside one coarse cluster, and exactly
                // one coarse cluster is split in two
                for set in partition_sets(&fine) {
                    prop_assert!(set.iter().all(|&i| coarse[i] == coarse[set[0]]));
                }
                prop_assert_eq!(partition_sets(&fine).len(), partition_sets(&coarse).len() + 1);
            }
            for k in 1..=n {
                let c = cut(&tree, &x, k).unwrap();
                let t = toks(n);
                let s = summarize(&c, &x, &t, SummaryMode::CentroidMedoid).unwrap();
                for (cl, tok) in s.iter().enumerate() {
                    let idx = t.iter().position(|v| v == tok).unwrap();
                    prop_assert_eq!(c.assignment[idx], cl);
                }
            }
        }

        #[test]
        fn permutation_equivariant(x in points(), seed in any::<u64>()) {
            let n = x.rows();
            let mut perm: Vec<usize> = (0..n).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in (1..n).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let y = x.select_rows(&perm);
            let k = (n / 2).max(1);
            let a = cut_labels(&agglomerate(&x, Linkage::Average).unwrap(), k).unwrap();
            let b = cut_labels(&agglomerate(&y, Linkage::Average).unwrap(), k).unwrap();
            // compare as sets of original indices
            let mut sa = partition_sets(&a);
            let mut sb: Vec<Vec<usize>> = partition_sets(&b)
                .into_iter()
                .map(|s| { let mut v: Vec<usize> = s.into_iter().map(|i| perm[i]).collect(); v.sort(); v })
                .collect();
            sa.sort();
            sb.sort();
            prop_assert_eq!(sa, sb);
        }
    }
}
