use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::zk::dpm::commit;
use crate::zk::field::{FieldConfig, SignedFixed};
use crate::zk::{CheckResult, Constraint, Violation};

/// Opening of one chunk commitment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Opening {
    pub r: [u8; 32],
    pub dot_prod: SignedFixed,
    pub sq_mag: BigUint,
}

/// Aggregation circuit. `img_mag` and `mag` are square roots at scale `2^16`;
/// `ca` and `t` are at scale `2^32`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombineInstance {
    // public
    pub commitments: Vec<[u8; 32]>,
    pub img_mag: BigUint,
    pub t: BigUint,
    // private
    pub openings: Vec<Opening>,
    pub mag: BigUint,
    pub ca: SignedFixed,
}

fn aggregate(cfg: &FieldConfig, openings: &[Opening]) -> (BigInt, BigUint) {
    let mut pos = BigUint::zero();
    let mut neg = BigUint::zero();
    let mut fsm = BigUint::zero();
    for o in openings {
        if o.dot_prod.negative {
            neg = cfg.add(&neg, &o.dot_prod.magnitude);
        } else {
            pos = cfg.add(&pos, &o.dot_prod.magnitude);
        }
        fsm = cfg.add(&fsm, &o.sq_mag);
    }
    (BigInt::from(pos) - BigInt::from(neg), fsm)
}

/// Honest witness: `mag = isqrt(FSM)`, `CA = floor(FDP 2^32 / (mag img_mag))`.
pub fn combine_witness(
    cfg: &FieldConfig,
    commitments: Vec<[u8; 32]>,
    openings: Vec<Opening>,
    img_mag: BigUint,
    t: BigUint,
) -> Result<CombineInstance> {
    let (fdp, fsm) = aggregate(cfg, &openings);
    let mag = fsm.sqrt();
    let denom = BigInt::from(&mag * &img_mag);
    if denom.is_zero() {
        return Err(Error::Degenerate("zero noise or image magnitude".into()));
    }
    let ca = (fdp << cfg.fixed_point_bits).div_floor(&denom);
    Ok(CombineInstance {
        commitments,
        img_mag,
        t,
        openings,
        mag,
        ca: SignedFixed::from_bigint(&ca),
    })
}

/// Replays the combine constraints; returns the first violation.
pub fn combine_check(cfg: &FieldConfig, inst: &CombineInstance) -> CheckResult {
    let fail = Violation::new;
    if inst.openings.len() != inst.commitments.len() || inst.openings.is_empty() {
        return Err(fail(Constraint::Shape));
    }
    let in_field = |v: &BigUint| cfg.contains(v);
    let values_ok = in_field(&inst.img_mag)
        && in_field(&inst.t)
        && in_field(&inst.mag)
        && in_field(&inst.ca.magnitude)
        && inst
            .openings
            .iter()
            .all(|o| in_field(&o.dot_prod.magnitude) && in_field(&o.sq_mag));
    if !values_ok {
        return Err(fail(Constraint::Range));
    }
    for (i, (o, com)) in inst.openings.iter().zip(&inst.commitments).enumerate() {
        if commit(&o.dot_prod, &o.sq_mag, &o.r) != *com {
            return Err(fail(Constraint::Commitment).at(i));
        }
    }
    let (fdp, fsm) = aggregate(cfg, &inst.openings);
    let next = &inst.mag + BigUint::one();
    if !(&inst.mag * &inst.mag <= fsm && fsm <= &next * &next) {
        return Err(fail(Constraint::MagnitudeBracket));
    }
    let norm = BigInt::from(&inst.mag * &inst.img_mag);
    let ca = inst.ca.to_bigint();
    let scaled = fdp << cfg.fixed_point_bits;
    let floor = &norm * &ca;
    let ceil = &norm * (&ca + 1);
    if !(floor <= scaled && scaled <= ceil) {
        return Err(fail(Constraint::CosineBracket));
    }
    if ca <= BigInt::from(inst.t.clone()) {
        return Err(fail(Constraint::Threshold));
    }
    Ok(())
}
