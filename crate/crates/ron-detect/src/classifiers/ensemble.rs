//! Majority-vote ensembles over trained classifiers.
//!
//! Two or three members of distinct kinds vote with their labels. A
//! 2-member split is an unstable decision and resolves by the configured
//! tie rule.

use crate::dataset::Label;
use crate::error::{Error, Result};

use super::{Classifier, TieBreak, TrainedGnb, TrainedKnn, TrainedSvm};

#[derive(Debug, Clone)]
pub enum EnsembleMember {
    Knn(TrainedKnn),
    Svm(TrainedSvm),
    Gnb(TrainedGnb),
}

impl EnsembleMember {
    pub fn kind_name(&self) -> &'static str {
        match self {
            EnsembleMember::Knn(_) => "knn",
            EnsembleMember::Svm(_) => "svm",
            EnsembleMember::Gnb(_) => "gnb",
        }
    }

    fn vote(&self, query: &[f64]) -> Result<Label> {
        match self {
            EnsembleMember::Knn(m) => m.classify(query),
            EnsembleMember::Svm(m) => m.classify(query),
            EnsembleMember::Gnb(m) => Ok(m.classify(query)?.0),
        }
    }

    fn n_features(&self) -> usize {
        match self {
            EnsembleMember::Knn(m) => m.n_features(),
            EnsembleMember::Svm(m) => m.n_features(),
            EnsembleMember::Gnb(m) => m.n_features(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedEnsemble {
    members: Vec<EnsembleMember>,
    tie_break: TieBreak,
}

impl TrainedEnsemble {
    /// Build an ensemble of 2 or 3 members with distinct kinds, all trained
    /// on the same feature space.
    pub fn new(members: Vec<EnsembleMember>, tie_break: TieBreak) -> Result<Self> {
        if !(2..=3).contains(&members.len()) {
            return Err(Error::Argument(format!(
                "ensemble needs 2 or 3 members, got {}",
                members.len()
            )));
        }
        for (i, a) in members.iter().enumerate() {
            for b in &members[i + 1..] {
                if a.kind_name() == b.kind_name() {
                    return Err(Error::Argument(format!(
                        "duplicate ensemble member kind {}",
                        a.kind_name()
                    )));
                }
            }
        }
        let dim = members[0].n_features();
        if members.iter().any(|m| m.n_features() != dim) {
            return Err(Error::Argument(
                "ensemble members trained on different feature spaces".into(),
            ));
        }
        Ok(Self { members, tie_break })
    }

    pub fn members(&self) -> &[EnsembleMember] {
        &self.members
    }

    pub fn tie_break(&self) -> TieBreak {
        self.tie_break
    }

    /// Member kinds joined with `+` in vote order.
    pub fn combination_name(&self) -> String {
        self.members
            .iter()
            .map(EnsembleMember::kind_name)
            .collect::<Vec<_>>()
            .join("+")
    }

    /// Majority label of the member votes.
    pub fn classify(&self, query: &[f64]) -> Result<Label> {
        let mut trojan = 0usize;
        for m in &self.members {
            if m.vote(query)?.is_trojan() {
                trojan += 1;
            }
        }
        let golden = self.members.len() - trojan;
        Ok(match trojan.cmp(&golden) {
            std::cmp::Ordering::Greater => Label::Trojan,
            std::cmp::Ordering::Less => Label::Golden,
            std::cmp::Ordering::Equal => self.tie_break.label(),
        })
    }

    /// Fraction of members voting Trojan.
    pub fn trojan_vote_fraction(&self, query: &[f64]) -> Result<f64> {
        let mut trojan = 0usize;
        for m in &self.members {
            if m.vote(query)?.is_trojan() {
                trojan += 1;
            }
        }
        Ok(trojan as f64 / self.members.len() as f64)
    }
}

impl Classifier for TrainedEnsemble {
    fn classify_point(&self, query: &[f64]) -> Result<Label> {
        self.classify(query)
    }

    fn n_features(&self) -> usize {
        self.members[0].n_features()
    }
}
