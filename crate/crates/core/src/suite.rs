//! Test-case descriptions and the applet suite built from them.
//!
//! A test case names one feature to measure: the applet's run method for it
//! executes any auxiliary operations first, then the feature itself, once
//! per loop iteration. The reference case (its own `reference_id`) has an
//! empty run body; subtracting it later removes loop and transport costs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SuiteError {
    #[error("suite document is not valid JSON: {0}")]
    Parse(String),
    #[error("duplicate case id {id:?}")]
    DuplicateId { id: String },
    #[error("duplicate INS byte {ins:#04x} (cases {first:?} and {second:?})")]
    DuplicateIns { ins: u8, first: String, second: String },
    #[error("case {id:?} references unknown case {reference_id:?}")]
    UnknownReference { id: String, reference_id: String },
    #[error(
        "case {id:?} uses {reference_id:?} as reference, but that case has a non-empty run body"
    )]
    InvalidReference { id: String, reference_id: String },
    #[error("reference case {id:?} must not declare auxiliaries")]
    ReferenceWithAuxiliaries { id: String },
    #[error("case {id:?} depends on unknown case {auxiliary:?}")]
    UnknownAuxiliary { id: String, auxiliary: String },
    #[error("auxiliary dependencies form a cycle through {id:?}")]
    DependencyCycle { id: String },
}

/// What kind of feature a case measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseKind {
    Bytecode,
    Api,
    Jcre,
}

/// One measurable feature: which INS selects it, which operations its run
/// body needs before it, and which case serves as its empty-loop reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestCaseSpec {
    pub id: String,
    pub ins: u8,
    pub kind: CaseKind,
    /// Operations executed before the measured one, in order; repeats allowed.
    pub auxiliaries: Vec<String>,
    pub reference_id: String,
}

impl TestCaseSpec {
    /// A case is a reference when it points at itself; its run body is empty.
    pub fn is_reference(&self) -> bool {
        self.reference_id == self.id
    }

    /// Operations the run method executes once per loop iteration.
    pub fn run_body(&self) -> Vec<&str> {
        if self.is_reference() {
            Vec::new()
        } else {
            let mut body: Vec<&str> = self.auxiliaries.iter().map(String::as_str).collect();
            body.push(&self.id);
            body
        }
    }
}

/// A validated set of test cases, indexable by id and by INS byte.
#[derive(Debug, Clone, PartialEq)]
pub struct AppletSuite {
    cases: Vec<TestCaseSpec>,
    by_id: BTreeMap<String, usize>,
    by_ins: BTreeMap<u8, usize>,
}

impl AppletSuite {
    /// Validates and indexes `cases`.
    ///
    /// Rejects duplicate ids or INS bytes, unresolved or non-empty
    /// references, unresolved auxiliaries, auxiliary cycles, and reference
    /// cases that declare auxiliaries.
    pub fn new(cases: Vec<TestCaseSpec>) -> Result<Self, SuiteError> {
        let mut by_id = BTreeMap::new();
        let mut by_ins: BTreeMap<u8, usize> = BTreeMap::new();
        for (idx, case) in cases.iter().enumerate() {
            if by_id.insert(case.id.clone(), idx).is_some() {
                return Err(SuiteError::DuplicateId { id: case.id.clone() });
            }
            if let Some(&first) = by_ins.get(&case.ins) {
                return Err(SuiteError::DuplicateIns {
                    ins: case.ins,
                    first: cases[first].id.clone(),
                    second: case.id.clone(),
                });
            }
            by_ins.insert(case.ins, idx);
        }

        for case in &cases {
            if case.is_reference() {
                if !case.auxiliaries.is_empty() {
                    return Err(SuiteError::ReferenceWithAuxiliaries { id: case.id.clone() });
                }
                continue;
            }
            match by_id.get(&case.reference_id) {
                None => {
                    return Err(SuiteError::UnknownReference {
                        id: case.id.clone(),
                        reference_id: case.reference_id.clone(),
                    })
                }
                Some(&idx) if !cases[idx].is_reference() => {
                    return Err(SuiteError::InvalidReference {
                        id: case.id.clone(),
                        reference_id: case.reference_id.clone(),
                    })
                }
                Some(_) => {}
            }
            for aux in &case.auxiliaries {
                if !by_id.contains_key(aux) {
                    return Err(SuiteError::UnknownAuxiliary {
                        id: case.id.clone(),
                        auxiliary: aux.clone(),
                    });
                }
            }
        }

        let suite = Self { cases, by_id, by_ins };
        suite.check_acyclic()?;
        Ok(suite)
    }

    /// Parses a suite document: a JSON array of test cases.
    pub fn from_json(document: &str) -> Result<Self, SuiteError> {
        let cases: Vec<TestCaseSpec> =
            serde_json::from_str(document).map_err(|e| SuiteError::Parse(e.to_string()))?;
        Self::new(cases)
    }

    // Depth-first walk over the auxiliary edges; colors: 0 new, 1 open, 2 done.
    fn check_acyclic(&self) -> Result<(), SuiteError> {
        let mut color = vec![0u8; self.cases.len()];
        for start in 0..self.cases.len() {
            self.visit(start, &mut color)?;
        }
        Ok(())
    }

    fn visit(&self, idx: usize, color: &mut [u8]) -> Result<(), SuiteError> {
        match color[idx] {
            1 => return Err(SuiteError::DependencyCycle { id: self.cases[idx].id.clone() }),
            2 => return Ok(()),
            _ => {}
        }
        color[idx] = 1;
        for aux in &self.cases[idx].auxiliaries {
            let next = self.by_id[aux];
            self.visit(next, color)?;
        }
        color[idx] = 2;
        Ok(())
    }

    pub fn cases(&self) -> &[TestCaseSpec] {
        &self.cases
    }

    pub fn case(&self, id: &str) -> Option<&TestCaseSpec> {
        self.by_id.get(id).map(|&idx| &self.cases[idx])
    }

    pub fn case_by_ins(&self, ins: u8) -> Option<&TestCaseSpec> {
        self.by_ins.get(&ins).map(|&idx| &self.cases[idx])
    }

    /// All feature ids any run body mentions (auxiliaries and measured ops).
    pub fn referenced_features(&self) -> Vec<&str> {
        let mut features: Vec<&str> = self.cases.iter().flat_map(|case| case.run_body()).collect();
        features.sort_unstable();
        features.dedup();
        features
    }

    /// Non-reference cases in dependency order (auxiliaries first), ties
    /// broken by id for a stable execution order.
    pub fn measurement_order(&self) -> Vec<&TestCaseSpec> {
        let mut remaining: BTreeMap<&str, &TestCaseSpec> = self
            .cases
            .iter()
            .filter(|case| !case.is_reference())
            .map(|case| (case.id.as_str(), case))
            .collect();
        let mut done: Vec<&TestCaseSpec> = Vec::new();
        let mut emitted: Vec<&str> = Vec::new();
        while !remaining.is_empty() {
            let ready: Vec<&str> = remaining
                .iter()
                .filter(|(_, case)| {
                    case.auxiliaries.iter().all(|aux| {
                        emitted.contains(&aux.as_str()) || !remaining.contains_key(aux.as_str())
                    })
                })
                .map(|(id, _)| *id)
                .collect();
            assert!(!ready.is_empty(), "suite validated acyclic");
            for id in ready {
                let case = remaining.remove(id).expect("listed as remaining");
                emitted.push(id);
                done.push(case);
            }
        }
        done
    }
}
