//! The eleven adaptation methods: controllers that intercept one stage of a
//! baseline evolutionary algorithm and execute network-sampled actions.
//!
//! Method-to-distribution mapping:
//! Bernoulli for parent selection and component-level binary mutation; beta
//! for population- and individual-level mutation rates; categorical for
//! crossover-operator selection; normal for fitness shaping, strategy
//! parameters, step-size control, and survivor selection.

mod controller;

pub use controller::{
    decode_action, generation_step, run_episode, select_survivors_by_score, shape_fitness,
    EpisodeRecord, GenerationOutcome, PolicyStep, SampleMode, TraceRow,
};

use crate::dist::DistKind;
use crate::error::{Error, Result};
use crate::net::{HeadSpec, OutputLevel};
use crate::problems::ProblemClass;
use crate::evo::ALL_OPERATORS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AdaptationMethod {
    FitnessShaping,
    SurvivorSelection,
    PopMutationRate,
    PopStrategyParam,
    OperatorSelection,
    IndMutationRate,
    IndStrategyParam,
    IndStepSize,
    ParentSelection,
    ComponentBinaryMutation,
    ComponentStepSize,
}

use AdaptationMethod::*;

impl AdaptationMethod {
    pub const ALL: [AdaptationMethod; 11] = [
        FitnessShaping,
        SurvivorSelection,
        PopMutationRate,
        PopStrategyParam,
        OperatorSelection,
        IndMutationRate,
        IndStrategyParam,
        IndStepSize,
        ParentSelection,
        ComponentBinaryMutation,
        ComponentStepSize,
    ];

    /// CLI/config identifier.
    pub fn id(&self) -> &'static str {
        match self {
            FitnessShaping => "fitness-shaping",
            SurvivorSelection => "survivor-selection",
            PopMutationRate => "pop-mutation-rate",
            PopStrategyParam => "pop-strategy-param",
            OperatorSelection => "operator-selection",
            IndMutationRate => "ind-mutation-rate",
            IndStrategyParam => "ind-strategy-param",
            IndStepSize => "ind-step-size",
            ParentSelection => "parent-selection",
            ComponentBinaryMutation => "component-binary-mutation",
            ComponentStepSize => "component-step-size",
        }
    }

    pub fn kind(&self) -> DistKind {
        match self {
            ParentSelection | ComponentBinaryMutation => DistKind::Bernoulli,
            PopMutationRate | IndMutationRate => DistKind::Beta,
            OperatorSelection => DistKind::Categorical,
            FitnessShaping | PopStrategyParam | IndStrategyParam | IndStepSize
            | ComponentStepSize | SurvivorSelection => DistKind::Normal,
        }
    }

    pub fn level(&self) -> OutputLevel {
        match self {
            PopMutationRate | PopStrategyParam | OperatorSelection => OutputLevel::Population,
            FitnessShaping | SurvivorSelection | IndMutationRate | IndStrategyParam
            | IndStepSize | ParentSelection => OutputLevel::Individual,
            ComponentBinaryMutation | ComponentStepSize => OutputLevel::Component,
        }
    }

    /// Problem classes the method was designed for (the experiment matrix).
    pub fn classes(&self) -> &'static [ProblemClass] {
        match self {
            FitnessShaping | SurvivorSelection | ParentSelection => {
                &[ProblemClass::Knapsack, ProblemClass::Continuous]
            }
            PopMutationRate | IndMutationRate | ComponentBinaryMutation => {
                &[ProblemClass::Knapsack]
            }
            PopStrategyParam | IndStrategyParam | IndStepSize | ComponentStepSize => {
                &[ProblemClass::Continuous]
            }
            OperatorSelection => &[ProblemClass::Tsp],
        }
    }

    pub fn applies_to(&self, class: ProblemClass) -> bool {
        self.classes().contains(&class)
    }

    /// Continuous genomes carry one step-size per gene for this method.
    pub fn per_gene_steps(&self) -> bool {
        matches!(self, ComponentStepSize)
    }

    pub fn head_spec(&self, class: ProblemClass, tsp_nodes: usize) -> Result<HeadSpec> {
        if !self.applies_to(class) {
            return Err(Error::invalid(format!(
                "method `{}` does not apply to problem class `{}`",
                self.id(),
                class.as_str()
            )));
        }
        let categories = match self.kind() {
            DistKind::Categorical => ALL_OPERATORS.len(),
            _ => 0,
        };
        Ok(HeadSpec {
            class,
            kind: self.kind(),
            level: self.level(),
            categories,
            tsp_nodes: if class == ProblemClass::Tsp { tsp_nodes } else { 0 },
        })
    }
}

impl std::str::FromStr for AdaptationMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        AdaptationMethod::ALL
            .iter()
            .find(|m| m.id() == s)
            .copied()
            .ok_or_else(|| Error::parse(format!("unknown adaptation method `{s}`")))
    }
}
