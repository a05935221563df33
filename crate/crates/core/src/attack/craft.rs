//! The crafting loop.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::domain::{LedgerEntry, SearchDomain};
use super::saliency::{classic_select, opposition, saliency_select};
use crate::constraints::{resolve, validate, ConstraintMap};
use crate::data::{FeatureKind, FeatureSchema};
use crate::error::{Error, Result};
use crate::nn::{Basis, MlpModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Mode {
    /// Direction chosen per feature from the target gradient.
    #[default]
    #[serde(rename = "adaptive")]
    Adaptive,
    /// Only increases, on features whose target gradient is positive.
    #[serde(rename = "classic+")]
    ClassicPlus,
    /// Only decreases, on features whose target gradient is negative.
    #[serde(rename = "classic-")]
    ClassicMinus,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive" => Ok(Mode::Adaptive),
            "classic+" => Ok(Mode::ClassicPlus),
            "classic-" => Ok(Mode::ClassicMinus),
            other => Err(Error::InvalidParameter(format!("unknown attack mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Adaptive => "adaptive",
            Mode::ClassicPlus => "classic+",
            Mode::ClassicMinus => "classic-",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackParams {
    pub target: usize,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_max_l0")]
    pub max_l0_fraction: f64,
    #[serde(default)]
    pub mode: Mode,
    /// Start from the full domain and only narrow it on resolution, instead
    /// of restricting it to the permitted set of the starting primary.
    #[serde(default)]
    pub lazy_domain: bool,
    #[serde(default)]
    pub basis: Basis,
}

fn default_theta() -> f64 {
    1.0
}
fn default_max_l0() -> f64 {
    0.30
}

impl AttackParams {
    pub fn new(target: usize) -> Self {
        AttackParams {
            target,
            theta: default_theta(),
            max_l0_fraction: default_max_l0(),
            mode: Mode::Adaptive,
            lazy_domain: false,
            basis: Basis::Logits,
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.theta > 0.0) {
            return Err(Error::InvalidParameter("theta must be positive".into()));
        }
        if !(self.max_l0_fraction > 0.0 && self.max_l0_fraction <= 1.0) {
            return Err(Error::InvalidParameter("max_l0_fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }

    /// Largest number of features saliency steps may change.
    pub fn budget(&self, width: usize) -> usize {
        (self.max_l0_fraction * width as f64 + 1e-9).floor() as usize
    }
}

/// Schema and learned map used to keep adversarial inputs permissible.
#[derive(Debug, Clone, Copy)]
pub struct Constraints<'a> {
    pub schema: &'a FeatureSchema,
    pub map: &'a ConstraintMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_id: Option<usize>,
    pub target: usize,
    pub success: bool,
    pub x_adv: Vec<f64>,
    pub ledger: Vec<LedgerEntry>,
    pub l0: usize,
    pub iterations: usize,
    /// Final predicted class.
    pub predicted: usize,
    /// Set when the last constraint resolution pushed l0 past the budget.
    #[serde(default)]
    pub budget_exceeded: bool,
}

/// Number of coordinates where `a` and `b` differ.
pub fn l0_distance(a: &[f64], b: &[f64]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

struct State<'a> {
    x: Vec<f64>,
    domain: SearchDomain,
    ledger: Vec<LedgerEntry>,
    fixed: &'a BTreeSet<usize>,
}

/// Crafts an adversarial version of `x` for `params.target`.
///
/// `fixed` lists encoded indices the attacker cannot touch. With
/// constraints, one-hot groups stay well formed: raising a member lowers
/// the previously active one, and protocol changes go through [`resolve`].
pub fn craft(
    model: &MlpModel,
    x: &[f64],
    params: &AttackParams,
    constraints: Option<Constraints<'_>>,
    fixed: &BTreeSet<usize>,
) -> Result<AttackResult> {
    params.check()?;
    model.check_width(x)?;
    let width = x.len();
    if let Some(ctx) = constraints {
        if ctx.schema.encoded_width() != width || ctx.map.width != width {
            return Err(Error::Dimension {
                expected: width,
                found: ctx.map.width,
            });
        }
        if let Some(v) = validate(x, ctx.schema, ctx.map).first() {
            return Err(Error::InvalidInput(format!("input violates constraints: {}", v.detail)));
        }
    }
    if let Some(&bad) = fixed.iter().find(|&&i| i >= width) {
        return Err(Error::InvalidInput(format!("fixed feature {bad} out of range")));
    }
    let target = params.target;
    if target >= model.class_count() {
        return Err(Error::InvalidParameter(format!("target class {target} out of range")));
    }

    let mut state = State {
        x: x.to_vec(),
        domain: initial_domain(x, constraints, fixed, params.lazy_domain),
        ledger: Vec::new(),
        fixed,
    };
    let budget = params.budget(width);
    let iteration_cap = width * ((1.0 / params.theta).ceil() as usize + 1);
    let mut iterations = 0;
    let mut predicted = model.predict(&state.x)?;
    let mut budget_exceeded = false;

    while predicted != target {
        let l0 = l0_distance(x, &state.x);
        if l0 >= budget {
            budget_exceeded = l0 > budget;
            break;
        }
        if iterations >= iteration_cap {
            break;
        }
        let jacobian = model.jacobian(&state.x, params.basis)?;
        let choice = match params.mode {
            Mode::Adaptive => saliency_select(&jacobian, &state.domain, target),
            Mode::ClassicPlus => classic_select(&jacobian, &state.domain, target, 1),
            Mode::ClassicMinus => classic_select(&jacobian, &state.domain, target, -1),
        };
        let Some((feature, direction)) = choice else {
            break;
        };
        iterations += 1;
        match constraints {
            None => step(&mut state, feature, direction, params.theta),
            Some(ctx) => {
                let scores: Vec<f64> = opposition(&jacobian, target).into_iter().map(|m| m.max(0.0)).collect();
                constrained_step(&mut state, ctx, feature, direction, params.theta, &scores)?;
            }
        }
        predicted = model.predict(&state.x)?;
    }

    let l0 = l0_distance(x, &state.x);
    Ok(AttackResult {
        input_id: None,
        target,
        success: predicted == target,
        x_adv: state.x,
        ledger: state.ledger,
        l0,
        iterations,
        predicted,
        budget_exceeded: budget_exceeded || l0 > budget,
    })
}

fn initial_domain(
    x: &[f64],
    constraints: Option<Constraints<'_>>,
    fixed: &BTreeSet<usize>,
    lazy: bool,
) -> SearchDomain {
    let mut domain = SearchDomain::full(x.len());
    for &i in fixed {
        domain.remove(i);
    }
    if let Some(ctx) = constraints {
        if !lazy {
            if let Some(k) = ctx.map.active_primary(x) {
                domain.retain_only(ctx.map.permitted(k));
            }
        }
        // Active one-hot members can only be left by raising another member.
        for (_, range) in ctx.schema.groups() {
            for i in range {
                if x[i] != 0.0 {
                    domain.remove(i);
                }
            }
        }
    }
    domain
}

/// Moves one feature by θ, clamped to [0, 1]. A feature that reaches an
/// extreme, or cannot move at all, leaves the domain.
fn step(state: &mut State<'_>, feature: usize, direction: i8, theta: f64) {
    let old = state.x[feature];
    let new = (old + f64::from(direction) * theta).clamp(0.0, 1.0);
    if new != old {
        state.x[feature] = new;
        state.ledger.push(LedgerEntry::saliency(feature, direction));
    }
    if new == 0.0 || new == 1.0 {
        state.domain.remove(feature);
    }
}

fn constrained_step(
    state: &mut State<'_>,
    ctx: Constraints<'_>,
    feature: usize,
    direction: i8,
    theta: f64,
    scores: &[f64],
) -> Result<()> {
    let snapshot = (state.x.clone(), state.ledger.len());
    let group = ctx.schema.group_of(feature);
    let discrete = group.is_some() || ctx.schema.raw_features[ctx.schema.owner(feature)].kind == FeatureKind::Binary;

    if discrete {
        // Binary columns jump straight to the extreme in the step direction.
        let new = if direction > 0 { 1.0 } else { 0.0 };
        if state.x[feature] != new {
            state.x[feature] = new;
            state.ledger.push(LedgerEntry::saliency(feature, direction));
        }
        state.domain.remove(feature);
    } else {
        step(state, feature, direction, theta);
    }

    let changed = state.x[feature] != snapshot.0[feature];
    if !changed {
        return Ok(());
    }
    if let Some(range) = group.filter(|_| !ctx.map.is_primary(feature)) {
        // A switched group is settled: further members would only undo it.
        for i in range {
            if i != feature && state.x[i] != 0.0 {
                state.x[i] = 0.0;
                state.ledger.push(LedgerEntry::resolution(i, -1));
            }
            state.domain.remove(i);
        }
    }

    let resolution = resolve(feature, &state.domain, scores, &state.x, ctx.map, ctx.schema)?;
    if resolution.ledger.iter().any(|e| state.fixed.contains(&e.feature)) {
        // The resolution would touch a feature the attacker cannot control.
        state.x = snapshot.0;
        state.ledger.truncate(snapshot.1);
        state.domain.remove(feature);
        return Ok(());
    }
    state.domain = resolution.domain;
    state.x = resolution.x;
    if let Some(k) = resolution.switched_to {
        state.domain.remove(k);
    }
    state.ledger.extend(resolution.ledger);
    Ok(())
}
