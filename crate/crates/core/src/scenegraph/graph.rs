use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::rolespace::Triplet;

/// Region feature `f_i` with its class distribution `Pr(x_i | f_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectCandidate {
    pub feature: Tensor,
    pub class_probs: Vec<f64>,
}

/// Union feature `f_{i→j}` with its predicate distribution
/// `Pr(x_{i→j} | f_i, f_{i→j})`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCandidate {
    pub feature: Tensor,
    pub predicate_probs: Vec<f64>,
}

/// Detector output for one image: objects plus directed relation candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGraph {
    objects: Vec<ObjectCandidate>,
    pairs: BTreeMap<(usize, usize), PairCandidate>,
    object_classes: Option<Vec<String>>,
    predicate_classes: Option<Vec<String>>,
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() || p.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::Argument(alloc::format!(
            "{what} is not a nonnegative distribution"
        )));
    }
    let s: f64 = p.iter().sum();
    if libm::fabs(s - 1.0) > 1e-9 {
        return Err(Error::Argument(alloc::format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

impl CandidateGraph {
    pub fn new(
        objects: Vec<ObjectCandidate>,
        pairs: BTreeMap<(usize, usize), PairCandidate>,
    ) -> Result<Self> {
        let n = objects.len();
        let d = objects.first().map(|o| o.feature.len());
        for (i, o) in objects.iter().enumerate() {
            check_distribution(&o.class_probs, &alloc::format!("object {i} distribution"))?;
            if Some(o.feature.len()) != d {
                return Err(Error::Argument("object features differ in dimension".into()));
            }
        }
        for (&(i, j), p) in &pairs {
            if i >= n || j >= n || i == j {
                return Err(Error::Argument(alloc::format!(
                    "pair ({i}→{j}) is not between two distinct objects of {n}"
                )));
            }
            if !pairs.contains_key(&(j, i)) {
                return Err(Error::Argument(alloc::format!(
                    "pair ({i}→{j}) has no reverse direction"
                )));
            }
            check_distribution(
                &p.predicate_probs,
                &alloc::format!("pair ({i}→{j}) distribution"),
            )?;
            if Some(p.feature.len()) != d {
                return Err(Error::Argument(alloc::format!(
                    "pair ({i}→{j}) feature dimension differs from objects"
                )));
            }
        }
        Ok(CandidateGraph {
            objects,
            pairs,
            object_classes: None,
            predicate_classes: None,
        })
    }

    /// Every ordered pair of distinct objects, each with `pair(i, j)`.
    pub fn fully_connected(
        objects: Vec<ObjectCandidate>,
        mut pair: impl FnMut(usize, usize) -> PairCandidate,
    ) -> Result<Self> {
        let n = objects.len();
        let mut pairs = BTreeMap::new();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    pairs.insert((i, j), pair(i, j));
                }
            }
        }
        Self::new(objects, pairs)
    }

    pub fn with_class_names(
        mut self,
        objects: Vec<String>,
        predicates: Vec<String>,
    ) -> Self {
        self.object_classes = Some(objects);
        self.predicate_classes = Some(predicates);
        self
    }

    pub fn objects(&self) -> &[ObjectCandidate] {
        &self.objects
    }

    pub fn pairs(&self) -> &BTreeMap<(usize, usize), PairCandidate> {
        &self.pairs
    }

    fn object_name(&self, label: usize) -> String {
        match &self.object_classes {
            Some(names) if label < names.len() => names[label].clone(),
            _ => label.to_string(),
        }
    }

    fn predicate_name(&self, label: usize) -> String {
        match &self.predicate_classes {
            Some(names) if label < names.len() => names[label].clone(),
            _ => label.to_string(),
        }
    }
}

/// A label for every object and for every directed pair.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Assignment {
    pub objects: Vec<usize>,
    pub pairs: BTreeMap<(usize, usize), usize>,
}

fn log_prob(p: &[f64], label: usize, what: impl Fn() -> String) -> Result<f64> {
    let v = *p
        .get(label)
        .ok_or_else(|| Error::Argument(alloc::format!("label {label} absent from {}", what())))?;
    // ln 0 = -inf, the sentinel for impossible assignments
    Ok(libm::log(v))
}

/// Log-likelihood of an assignment: the log of the product of every object
/// term and both directions of every pair term.
pub fn score_scene_graph(g: &CandidateGraph, assignment: &Assignment) -> Result<f64> {
    if assignment.objects.len() != g.objects.len() {
        return Err(Error::Argument(alloc::format!(
            "assignment labels {} objects, graph has {}",
            assignment.objects.len(),
            g.objects.len()
        )));
    }
    let mut total = 0.0;
    for (&(i, j), pair) in &g.pairs {
        let label = *assignment.pairs.get(&(i, j)).ok_or_else(|| {
            Error::Argument(alloc::format!("assignment misses pair ({i}→{j})"))
        })?;
        total += log_prob(&pair.predicate_probs, label, || alloc::format!("pair ({i}→{j})"))?;
    }
    for (i, (o, &label)) in g.objects.iter().zip(&assignment.objects).enumerate() {
        total += log_prob(&o.class_probs, label, || alloc::format!("object {i}"))?;
    }
    Ok(total)
}

/// A triplet read off one directed pair, with its log-likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedTriplet {
    pub pair: (usize, usize),
    /// Subject class, predicate class, object class.
    pub labels: [usize; 3],
    pub score: f64,
    pub triplet: Triplet,
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Takes the most likely subject, predicate and object label for every
/// directed pair and returns the `k_max` pairs with the highest summed
/// log-probability, ties broken by pair order.
pub fn select_triplets(g: &CandidateGraph, k_max: usize) -> Result<Vec<SelectedTriplet>> {
    if k_max == 0 {
        return Err(Error::Argument("k_max must be at least 1".into()));
    }
    if g.pairs.is_empty() {
        return Err(Error::Argument("graph has no pairs".into()));
    }
    let mut out = Vec::with_capacity(g.pairs.len());
    for (&(i, j), pair) in &g.pairs {
        let (si, oi) = (&g.objects[i], &g.objects[j]);
        let s = argmax(&si.class_probs);
        let p = argmax(&pair.predicate_probs);
        let o = argmax(&oi.class_probs);
        let score = libm::log(si.class_probs[s])
            + libm::log(pair.predicate_probs[p])
            + libm::log(oi.class_probs[o]);
        let triplet = Triplet {
            subject: si.feature.clone(),
            predicate: pair.feature.clone(),
            object: oi.feature.clone(),
            labels: Some([g.object_name(s), g.predicate_name(p), g.object_name(o)]),
        };
        out.push(SelectedTriplet {
            pair: (i, j),
            labels: [s, p, o],
            score,
            triplet,
        });
    }
    // stable sort keeps BTreeMap pair order among equal scores
    out.sort_by(|a, b| b.score.total_cmp(&a.score));
    out.truncate(k_max);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn obj(p: Vec<f64>) -> ObjectCandidate {
        ObjectCandidate {
            feature: Tensor::vector(vec![1.0, 0.0]),
            class_probs: p,
        }
    }

    fn pair(p: Vec<f64>) -> PairCandidate {
        PairCandidate {
            feature: Tensor::vector(vec![0.0, 1.0]),
            predicate_probs: p,
        }
    }

    #[test]
    fn certain_assignment_scores_zero() {
        let g = CandidateGraph::fully_connected(vec![obj(vec![1.0]), obj(vec![0.0, 1.0])], |_, _| {
            pair(vec![1.0, 0.0])
        })
        .unwrap();
        let a = Assignment {
            objects: vec![0, 1],
            pairs: [((0, 1), 0), ((1, 0), 0)].into_iter().collect(),
        };
        assert_eq!(score_scene_graph(&g, &a).unwrap(), 0.0);
    }

    #[test]
    fn single_object_half() {
        let g = CandidateGraph::new(vec![obj(vec![0.5, 0.5])], BTreeMap::new()).unwrap();
        let a = Assignment {
            objects: vec![1],
            pairs: BTreeMap::new(),
        };
        let s = score_scene_graph(&g, &a).unwrap();
        assert!((s - libm::log(0.5)).abs() < 1e-15);
        assert!((s + core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn uniform_two_object_graph() {
        let g = CandidateGraph::fully_connected(vec![obj(vec![0.25; 4]), obj(vec![0.25; 4])], |_, _| {
            pair(vec![1.0 / 3.0; 3])
        })
        .unwrap();
        let a = Assignment {
            objects: vec![2, 3],
            pairs: [((0, 1), 1), ((1, 0), 2)].into_iter().collect(),
        };
        let want = 2.0 * libm::log(0.25) + 2.0 * libm::log(1.0 / 3.0);
        assert!((score_scene_graph(&g, &a).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn zero_probability_gives_negative_infinity() {
        let g = CandidateGraph::new(vec![obj(vec![1.0, 0.0])], BTreeMap::new()).unwrap();
        let a = Assignment {
            objects: vec![1],
            pairs: BTreeMap::new(),
        };
        assert_eq!(score_scene_graph(&g, &a).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn absent_label_and_missing_pair_are_errors() {
        let g = CandidateGraph::fully_connected(vec![obj(vec![1.0]), obj(vec![1.0])], |_, _| {
            pair(vec![1.0])
        })
        .unwrap();
        let bad_label = Assignment {
            objects: vec![0, 5],
            pairs: [((0, 1), 0), ((1, 0), 0)].into_iter().collect(),
        };
        assert!(score_scene_graph(&g, &bad_label).is_err());
        let missing = Assignment {
            objects: vec![0, 0],
            pairs: [((0, 1), 0)].into_iter().collect(),
        };
        assert!(score_scene_graph(&g, &missing).is_err());
    }

    #[test]
    fn construction_validates_invariants() {
        let one_way: BTreeMap<_, _> = [((0, 1), pair(vec![1.0]))].into_iter().collect();
        assert!(CandidateGraph::new(vec![obj(vec![1.0]), obj(vec![1.0])], one_way).is_err());
        assert!(CandidateGraph::new(vec![obj(vec![0.5, 0.6])], BTreeMap::new()).is_err());
        assert!(CandidateGraph::new(vec![obj(vec![-0.5, 1.5])], BTreeMap::new()).is_err());
    }

    #[test]
    fn one_hot_pair_selects_its_triplet() {
        let g = CandidateGraph::fully_connected(
            vec![obj(vec![0.0, 1.0]), obj(vec![1.0, 0.0])],
            |_, _| pair(vec![0.0, 0.0, 1.0]),
        )
        .unwrap()
        .with_class_names(vec!["cat".into(), "mat".into()], vec!["a".into(), "b".into(), "on".into()]);
        let top = select_triplets(&g, 1).unwrap();
        assert_eq!(top.len(), 1);
        assert_eq!(top[0].pair, (0, 1));
        assert_eq!(top[0].labels, [1, 2, 0]);
        assert_eq!(top[0].score, 0.0);
        assert_eq!(
            top[0].triplet.labels.as_ref().unwrap(),
            &["mat".to_string(), "on".to_string(), "cat".to_string()]
        );
        assert_eq!(top[0].triplet.predicate.data(), &[0.0, 1.0]);
    }

    #[test]
    fn oversized_k_returns_all_sorted() {
        let g = CandidateGraph::fully_connected(
            vec![obj(vec![0.9, 0.1]), obj(vec![0.6, 0.4])],
            |i, _| if i == 0 { pair(vec![0.5, 0.5]) } else { pair(vec![0.2, 0.8]) },
        )
        .unwrap();
        let all = select_triplets(&g, 10).unwrap();
        assert_eq!(all.len(), 2);
        assert!(all[0].score >= all[1].score);
        assert_eq!(all[0].pair, (1, 0));
    }

    #[test]
    fn empty_graph_and_zero_k_are_errors() {
        let g = CandidateGraph::new(vec![obj(vec![1.0])], BTreeMap::new()).unwrap();
        assert!(select_triplets(&g, 1).is_err());
        let g = CandidateGraph::fully_connected(vec![obj(vec![1.0]), obj(vec![1.0])], |_, _| {
            pair(vec![1.0])
        })
        .unwrap();
        assert!(select_triplets(&g, 0).is_err());
    }
}
