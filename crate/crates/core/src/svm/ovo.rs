//! One-vs-one multiclass wrapper with majority voting.

use super::smo::{smo_train, SmoParams, SvmModel};
use crate::data::Dataset;

/// `K(K−1)/2` binary machines, one per unordered class pair, in canonical
/// `(a, b)` order with `a < b`. The machine scores positive for class `a`.
#[derive(Debug, Clone)]
pub struct OvoEnsemble {
    pub machines: Vec<(usize, usize, SvmModel)>,
    pub n_classes: usize,
}

/// Trains all pairwise machines on the subset of rows in each pair.
pub fn train_ovo(train: &Dataset, params: &SmoParams) -> OvoEnsemble {
    let k = train.n_classes();
    let mut machines = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in (a + 1)..k {
            let idx: Vec<usize> = (0..train.len())
                .filter(|&i| train.labels[i] == a || train.labels[i] == b)
                .collect();
            let features: Vec<Vec<f64>> =
                idx.iter().map(|&i| train.features[i].clone()).collect();
            let y: Vec<f64> = idx
                .iter()
                .map(|&i| if train.labels[i] == a { 1.0 } else { -1.0 })
                .collect();
            machines.push((a, b, smo_train(&features, &y, params)));
        }
    }
    OvoEnsemble {
        machines,
        n_classes: k,
    }
}

/// Majority vote; ties broken by the larger sum of |score| margins among
/// tied classes, then by the smaller class id.
pub fn predict_multiclass(ens: &OvoEnsemble, h: &[f64]) -> usize {
    let mut votes = vec![0usize; ens.n_classes];
    let mut margin = vec![0.0f64; ens.n_classes];
    for (a, b, model) in &ens.machines {
        let s = model.score(h);
        let winner = if s >= 0.0 { *a } else { *b };
        votes[winner] += 1;
        margin[*a] += s.abs();
        margin[*b] += s.abs();
    }
    let top = *votes.iter().max().unwrap();
    (0..ens.n_classes)
        .filter(|&c| votes[c] == top)
        .max_by(|&x, &y| {
            margin[x]
                .partial_cmp(&margin[y])
                .unwrap()
                .then(y.cmp(&x)) // smaller id wins remaining ties
        })
        .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_class_dataset() -> Dataset {
        // tight, well-separated clusters
        let centers = [(0.0, 0.0), (4.0, 0.0), (0.0, 4.0)];
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (c, &(cx, cy)) in centers.iter().enumerate() {
            for (dx, dy) in [(-0.2, 0.0), (0.2, 0.0), (0.0, -0.2), (0.0, 0.2)] {
                features.push(vec![cx + dx, cy + dy]);
                labels.push(c);
            }
        }
        Dataset::new(features, labels, vec![0, 1, 2])
    }

    #[test]
    fn ensemble_size_is_k_choose_2() {
        let ds = three_class_dataset();
        let ens = train_ovo(&ds, &SmoParams::new(10.0, 0.5));
        assert_eq!(ens.machines.len(), 3);
        assert_eq!(ens.n_classes, 3);
    }

    #[test]
    fn unanimous_votes_classify_the_clusters() {
        let ds = three_class_dataset();
        let ens = train_ovo(&ds, &SmoParams::new(10.0, 0.5));
        assert_eq!(predict_multiclass(&ens, &[0.0, 0.0]), 0);
        assert_eq!(predict_multiclass(&ens, &[4.0, 0.0]), 1);
        assert_eq!(predict_multiclass(&ens, &[0.0, 4.0]), 2);
    }

    #[test]
    fn binary_prediction_agrees_with_score_sign() {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            let x = i as f64 / 3.0;
            features.push(vec![x, -x * 0.5]);
            labels.push(if i < 5 { 0 } else { 1 });
        }
        let ds = Dataset::new(features, labels, vec![0, 1]);
        let ens = train_ovo(&ds, &SmoParams::new(5.0, 1.0));
        let model = &ens.machines[0].2;
        for i in 0..60 {
            let h = vec![i as f64 * 0.07 - 0.5, 0.3 - i as f64 * 0.02];
            let by_vote = predict_multiclass(&ens, &h);
            let by_sign = if model.score(&h) >= 0.0 { 0 } else { 1 };
            assert_eq!(by_vote, by_sign, "disagreement at {h:?}");
        }
    }

    #[test]
    fn circular_tie_breaks_on_margin_sums() {
        // hand-built ensemble: a beats b (score +1), b beats c (+2),
        // c beats a (+4); every class gets one vote, and c holds the
        // largest |score| sum (2 + 4 = 6)
        let dummy = |bias: f64| SvmModel {
            support_vectors: vec![],
            coeffs: vec![],
            intercept: bias,
            gamma: 1.0,
            c: 1.0,
            stalled: false,
            alphas: vec![],
            label_signs: vec![],
        };
        let ens = OvoEnsemble {
            machines: vec![
                (0, 1, dummy(1.0)),
                (1, 2, dummy(2.0)),
                (0, 2, dummy(-4.0)),
            ],
            n_classes: 3,
        };
        // margins: a: 1+4=5, b: 1+2=3, c: 2+4=6 → c wins the tie
        assert_eq!(predict_multiclass(&ens, &[0.0]), 2);
    }

    #[test]
    fn exact_margin_tie_goes_to_the_smaller_id() {
        let dummy = |bias: f64| SvmModel {
            support_vectors: vec![],
            coeffs: vec![],
            intercept: bias,
            gamma: 1.0,
            c: 1.0,
            stalled: false,
            alphas: vec![],
            label_signs: vec![],
        };
        let ens = OvoEnsemble {
            machines: vec![
                (0, 1, dummy(2.0)),
                (1, 2, dummy(2.0)),
                (0, 2, dummy(-2.0)),
            ],
            n_classes: 3,
        };
        // one vote each; margins a: 4, b: 4, c: 4 → class 0
        assert_eq!(predict_multiclass(&ens, &[0.0]), 0);
    }
}
