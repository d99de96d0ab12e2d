//! Labelling of harvested proposals into the four second-stage cases and
//! the models that guess the case of a new proposal.

mod logistic;
mod tree;

pub use logistic::{fit_logistic, LogisticModel};
pub use tree::{fit_tree, TreeNode, TreeOptions};

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::surrogate::{Surrogate, TrainingDataset};
use crate::types::ParameterPoint;

/// Which of the four surrogate/estimator orderings a proposal falls into.
///
/// Case1: surrogate higher, estimator higher. Case2: both lower.
/// Case3: surrogate higher, estimator lower. Case4: surrogate lower, estimator higher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseLabel {
    Case1,
    Case2,
    Case3,
    Case4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseGroup {
    Group13,
    Group24,
}

impl CaseLabel {
    pub const ALL: [CaseLabel; 4] = [CaseLabel::Case1, CaseLabel::Case2, CaseLabel::Case3, CaseLabel::Case4];

    /// Ties count as "lower" on both axes.
    pub fn from_orderings(gp_star_higher: bool, pf_star_higher: bool) -> Self {
        match (gp_star_higher, pf_star_higher) {
            (true, true) => CaseLabel::Case1,
            (true, false) => CaseLabel::Case3,
            (false, false) => CaseLabel::Case2,
            (false, true) => CaseLabel::Case4,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            CaseLabel::Case1 => 1,
            CaseLabel::Case2 => 2,
            CaseLabel::Case3 => 3,
            CaseLabel::Case4 => 4,
        }
    }

    pub fn group(self) -> CaseGroup {
        match self {
            CaseLabel::Case1 | CaseLabel::Case3 => CaseGroup::Group13,
            CaseLabel::Case2 | CaseLabel::Case4 => CaseGroup::Group24,
        }
    }

    /// Case1 within Group13, Case2 within Group24.
    fn is_first_of_group(self) -> bool {
        matches!(self, CaseLabel::Case1 | CaseLabel::Case2)
    }
}

impl CaseGroup {
    fn pick(self, first: bool) -> CaseLabel {
        match (self, first) {
            (CaseGroup::Group13, true) => CaseLabel::Case1,
            (CaseGroup::Group13, false) => CaseLabel::Case3,
            (CaseGroup::Group24, true) => CaseLabel::Case2,
            (CaseGroup::Group24, false) => CaseLabel::Case4,
        }
    }

    fn of(gp_star_higher: bool) -> Self {
        if gp_star_higher {
            CaseGroup::Group13
        } else {
            CaseGroup::Group24
        }
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Labelled proposals. Each feature row is `θ*` followed by the surrogate log-ratio.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledCases {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<CaseLabel>,
}

impl LabeledCases {
    pub fn push(&mut self, theta_star: &[f64], gp_log_ratio: f64, label: CaseLabel) {
        let mut row = theta_star.to_vec();
        row.push(gp_log_ratio);
        self.features.push(row);
        self.labels.push(label);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn count(&self, label: CaseLabel) -> usize {
        self.labels.iter().filter(|l| **l == label).count()
    }

    /// Feature rows and "first case of the group" responses for one group.
    pub(crate) fn group_rows(&self, group: CaseGroup) -> (Vec<&[f64]>, Vec<bool>) {
        self.features
            .iter()
            .zip(&self.labels)
            .filter(|(_, l)| l.group() == group)
            .map(|(f, l)| (f.as_slice(), l.is_first_of_group()))
            .unzip()
    }
}

/// Labels every harvested proposal using fresh surrogate draws at `θ*` and at the
/// aligned chain state.
pub fn label_training_cases<S: Surrogate + ?Sized>(
    data: &TrainingDataset,
    surrogate: &S,
    rng: &mut RngStream,
) -> Result<LabeledCases> {
    let aligned = data
        .chain_aligned
        .as_ref()
        .ok_or_else(|| Error::InsufficientData("case labelling needs the chain-aligned harvest".into()))?;
    let mut out = LabeledCases::default();
    for i in 0..data.len() {
        let star = &data.proposals[i];
        let prev = &aligned.states[i];
        let gp_star = surrogate.draw(star, rng)?;
        let gp_prev = surrogate.draw(prev, rng)?;
        let label = CaseLabel::from_orderings(gp_star > gp_prev, data.logliks[i] > aligned.logliks[i]);
        out.push(star.as_slice(), gp_star - gp_prev, label);
    }
    Ok(out)
}

/// What a selector may look at: nothing that needs the particle filter.
#[derive(Debug, Clone, Copy)]
pub struct SelectionContext<'a> {
    pub iteration: usize,
    pub theta_star: &'a ParameterPoint,
    pub theta_prev: &'a ParameterPoint,
    pub gp_log_ratio: f64,
    pub gp_star_higher: bool,
}

pub trait CaseSelect: Sync {
    fn select(&self, ctx: &SelectionContext<'_>, rng: &mut RngStream) -> CaseLabel;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectorKind {
    Coin,
    Logistic,
    Tree,
}

impl SelectorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectorKind::Coin => "coin",
            SelectorKind::Logistic => "logistic",
            SelectorKind::Tree => "tree",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CaseSelector {
    /// `p1 = P(Case1 | Group13)`, `p2 = P(Case2 | Group24)`.
    Coin {
        p1: f64,
        p2: f64,
    },
    Logistic {
        group13: LogisticModel,
        group24: LogisticModel,
    },
    Tree {
        group13: TreeNode,
        group24: TreeNode,
    },
}

fn check_groups(labels: &LabeledCases) -> Result<()> {
    for (group, name) in [(CaseGroup::Group13, "1/3"), (CaseGroup::Group24, "2/4")] {
        if !labels.labels.iter().any(|l| l.group() == group) {
            return Err(Error::InsufficientData(format!(
                "no training proposals fell in cases {name}; run a longer harvest"
            )));
        }
    }
    Ok(())
}

pub fn fit_biased_coin(labels: &LabeledCases) -> Result<CaseSelector> {
    check_groups(labels)?;
    let c = |l| labels.count(l) as f64;
    Ok(CaseSelector::Coin {
        p1: c(CaseLabel::Case1) / (c(CaseLabel::Case1) + c(CaseLabel::Case3)),
        p2: c(CaseLabel::Case2) / (c(CaseLabel::Case2) + c(CaseLabel::Case4)),
    })
}

pub fn fit_selector(kind: SelectorKind, labels: &LabeledCases, tree: &TreeOptions) -> Result<CaseSelector> {
    check_groups(labels)?;
    Ok(match kind {
        SelectorKind::Coin => fit_biased_coin(labels)?,
        SelectorKind::Logistic => CaseSelector::Logistic {
            group13: fit_logistic(labels, CaseGroup::Group13)?,
            group24: fit_logistic(labels, CaseGroup::Group24)?,
        },
        SelectorKind::Tree => CaseSelector::Tree {
            group13: fit_tree(labels, CaseGroup::Group13, tree)?,
            group24: fit_tree(labels, CaseGroup::Group24, tree)?,
        },
    })
}

impl CaseSelector {
    pub fn kind(&self) -> SelectorKind {
        match self {
            CaseSelector::Coin { .. } => SelectorKind::Coin,
            CaseSelector::Logistic { .. } => SelectorKind::Logistic,
            CaseSelector::Tree { .. } => SelectorKind::Tree,
        }
    }

    /// Probability of the group's first case (Case1 or Case2); `None` for trees.
    pub fn first_case_probability(&self, group: CaseGroup, theta_star: &[f64]) -> Option<f64> {
        match (self, group) {
            (CaseSelector::Coin { p1, .. }, CaseGroup::Group13) => Some(*p1),
            (CaseSelector::Coin { p2, .. }, CaseGroup::Group24) => Some(*p2),
            (CaseSelector::Logistic { group13, .. }, CaseGroup::Group13) => Some(group13.probability(theta_star)),
            (CaseSelector::Logistic { group24, .. }, CaseGroup::Group24) => Some(group24.probability(theta_star)),
            (CaseSelector::Tree { .. }, _) => None,
        }
    }
}

pub fn select_case(
    selector: &CaseSelector,
    theta_star: &ParameterPoint,
    gp_log_ratio: f64,
    gp_star_higher: bool,
    rng: &mut RngStream,
) -> CaseLabel {
    let group = CaseGroup::of(gp_star_higher);
    let first = match selector {
        CaseSelector::Tree { group13, group24 } => {
            let mut row = theta_star.to_vec();
            row.push(gp_log_ratio);
            match group {
                CaseGroup::Group13 => group13.predict(&row),
                CaseGroup::Group24 => group24.predict(&row),
            }
        }
        _ => {
            let p = selector.first_case_probability(group, theta_star.as_slice()).unwrap_or(0.0);
            rng.random::<f64>() < p
        }
    };
    group.pick(first)
}

impl CaseSelect for CaseSelector {
    fn select(&self, ctx: &SelectionContext<'_>, rng: &mut RngStream) -> CaseLabel {
        select_case(self, ctx.theta_star, ctx.gp_log_ratio, ctx.gp_star_higher, rng)
    }
}

/// Fraction of labelled rows whose selected case equals the label.
pub fn selection_agreement(selector: &CaseSelector, labels: &LabeledCases, rng: &mut RngStream) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptyInput("labelled cases"));
    }
    let hits = labels
        .features
        .iter()
        .zip(&labels.labels)
        .filter(|(row, label)| {
            let d = row.len() - 1;
            let theta = ParameterPoint::new(row[..d].to_vec()).expect("labelled rows are finite");
            let gp_higher = label.group() == CaseGroup::Group13;
            select_case(selector, &theta, row[d], gp_higher, rng) == **label
        })
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::ChainAligned;

    fn labels(counts: &[(CaseLabel, usize)]) -> LabeledCases {
        let mut l = LabeledCases::default();
        for &(c, n) in counts {
            for i in 0..n {
                l.push(&[i as f64], 0.0, c);
            }
        }
        l
    }

    #[test]
    fn label_examples() {
        assert_eq!(CaseLabel::from_orderings(true, true), CaseLabel::Case1);
        assert_eq!(CaseLabel::from_orderings(false, false), CaseLabel::Case2);
        assert_eq!(CaseLabel::from_orderings(true, false), CaseLabel::Case3);
        assert_eq!(CaseLabel::from_orderings(false, true), CaseLabel::Case4);
        assert_eq!(serde_json::to_string(&CaseLabel::Case3).unwrap(), "\"case3\"");
    }

    struct Table(Vec<(f64, f64)>);

    impl Surrogate for Table {
        fn dim(&self) -> usize {
            1
        }

        fn draw(&self, theta: &ParameterPoint, _rng: &mut RngStream) -> Result<f64> {
            Ok(self.0.iter().find(|(x, _)| *x == theta[0]).unwrap().1)
        }
    }

    #[test]
    fn labelling_matches_brute_force_comparator() {
        let mut rng = RngStream::new(3, 0);
        let n = 200;
        let mut table = Vec::new();
        let (mut star, mut prev, mut ls, mut lp) = (vec![], vec![], vec![], vec![]);
        for i in 0..n {
            let a = i as f64;
            let b = 1000.0 + i as f64;
            table.push((a, rng.random::<f64>()));
            table.push((b, rng.random::<f64>()));
            star.push(ParameterPoint::new(vec![a]).unwrap());
            prev.push(ParameterPoint::new(vec![b]).unwrap());
            ls.push(-rng.random::<f64>());
            lp.push(-rng.random::<f64>());
        }
        let data =
            TrainingDataset::new(star, ls.clone(), Some(ChainAligned { states: prev, logliks: lp.clone() })).unwrap();
        let table = Table(table);
        let out = label_training_cases(&data, &table, &mut rng).unwrap();
        for i in 0..n {
            let gs = table.0[2 * i].1;
            let gp = table.0[2 * i + 1].1;
            let expected = if gs > gp {
                if ls[i] > lp[i] {
                    1
                } else {
                    3
                }
            } else if ls[i] > lp[i] {
                4
            } else {
                2
            };
            assert_eq!(out.labels[i].number(), expected);
            assert!((out.features[i][1] - (gs - gp)).abs() < 1e-15);
        }

        let no_align = TrainingDataset::new(data.proposals.clone(), ls, None).unwrap();
        assert!(label_training_cases(&no_align, &table, &mut rng).is_err());
    }

    #[test]
    fn coin_examples() {
        use CaseLabel::*;
        let sel = fit_biased_coin(&labels(&[(Case1, 59), (Case3, 41), (Case2, 91), (Case4, 9)])).unwrap();
        let CaseSelector::Coin { p1, p2 } = sel else { panic!() };
        assert!((p1 - 0.59).abs() < 1e-12 && (p2 - 0.91).abs() < 1e-12);
        assert_eq!(p1 + (1.0 - p1), 1.0);

        let sel = fit_biased_coin(&labels(&[(Case1, 5), (Case2, 3)])).unwrap();
        assert_eq!(sel, CaseSelector::Coin { p1: 1.0, p2: 1.0 });

        let err = fit_biased_coin(&labels(&[(Case1, 5)])).unwrap_err();
        assert!(err.to_string().contains("longer harvest"), "{err}");
    }

    #[test]
    fn coin_selection() {
        let theta = ParameterPoint::new(vec![0.0]).unwrap();
        let mut rng = RngStream::new(1, 1);
        let always = CaseSelector::Coin { p1: 1.0, p2: 0.0 };
        for _ in 0..1000 {
            assert_eq!(select_case(&always, &theta, 1.0, true, &mut rng), CaseLabel::Case1);
            assert_eq!(select_case(&always, &theta, -1.0, false, &mut rng), CaseLabel::Case4);
        }
        let coin = CaseSelector::Coin { p1: 0.59, p2: 0.5 };
        let n = 100_000;
        let hits = (0..n).filter(|_| select_case(&coin, &theta, 0.1, true, &mut rng) == CaseLabel::Case1).count();
        assert!((hits as f64 / n as f64 - 0.59).abs() < 0.005);
    }

    #[test]
    fn selection_stays_in_group() {
        let mut rng = RngStream::new(5, 0);
        let mut l = LabeledCases::default();
        for i in 0..400 {
            let x = rng.random_range(-1.0..1.0);
            let label = CaseLabel::ALL[i % 4];
            l.push(&[x], rng.random_range(-1.0..1.0), label);
        }
        for kind in [SelectorKind::Coin, SelectorKind::Logistic, SelectorKind::Tree] {
            let sel = fit_selector(kind, &l, &TreeOptions::default()).unwrap();
            for _ in 0..200 {
                let theta = ParameterPoint::new(vec![rng.random_range(-2.0..2.0)]).unwrap();
                let r = rng.random_range(-1.0..1.0);
                assert_eq!(select_case(&sel, &theta, r, true, &mut rng).group(), CaseGroup::Group13);
                assert_eq!(select_case(&sel, &theta, r, false, &mut rng).group(), CaseGroup::Group24);
            }
            let json = serde_json::to_string(&sel).unwrap();
            assert_eq!(serde_json::from_str::<CaseSelector>(&json).unwrap(), sel);
        }
    }
}
