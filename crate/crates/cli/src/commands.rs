use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Subcommand, ValueEnum};
use noiseprints::calibration::{calibrate_threshold, Fpr};
use noiseprints::harness::{
    apply_attack, evaluate_robustness, psnr, ssim, synth_latent, AttackKind, AttackSpec,
    EvalConfig, SyntheticSpec,
};
use noiseprints::noise::{derive_noise, read_seed, sha256, write_seed, NoiseSpec, SeedRecord};
use noiseprints::protocol::{
    dispute, estimate_alignment, registry_append, verify, AlignmentFamily, Claim, Winner,
};
use noiseprints::scoring::{correlation_map, extended_score, low_entropy_warning, noiseprint_score};
use noiseprints::tensor::{read_tensor, write_tensor, LatentTensor};
use noiseprints::transform::TransformSpec;
use noiseprints::zk::{zk_prove_emulated, zk_verify_emulated, ProofBundle};
use noiseprints::Error;
use serde_json::json;

use crate::config::{usage, RunConfig, ThresholdArgs};
use crate::{Report, EXIT_ACCEPT, EXIT_REJECT, EXIT_UNRESOLVED};

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derive the noise tensor for a seed and shape.
    Derive(DeriveArgs),
    /// Calibrate the score threshold for a dimension and false-positive rate.
    Calibrate(CalibrateArgs),
    /// Score content against a seed, optionally through a transform.
    Score(ScoreArgs),
    /// Verify a claim file (exit 0 accept, 1 reject).
    Verify(VerifyArgs),
    /// Resolve two competing claims (exit 0 A wins, 1 B wins, 2 unresolved).
    Dispute(DisputeArgs),
    /// Estimate the transform between reference content and a modified copy.
    EstimateAlign(EstimateAlignArgs),
    /// Generate a synthetic latent with a planted NoisePrint.
    Simulate(SimulateArgs),
    /// Apply one attack to a tensor.
    Attack(AttackArgs),
    /// Run the robustness evaluation and report TPR at fixed false-positive rates.
    Evaluate(EvaluateArgs),
    /// Compute the spatial correlation map and its threshold mask.
    CorrMap(CorrMapArgs),
    /// Produce an emulated proof bundle (not zero-knowledge: it contains the private seed).
    ZkProve(ZkProveArgs),
    /// Check an emulated proof bundle against public inputs.
    ZkVerify(ZkVerifyArgs),
}

pub fn dispatch(cmd: Command, cfg: &RunConfig) -> Result<Report> {
    match cmd {
        Command::Derive(a) => derive_cmd(a, cfg),
        Command::Calibrate(a) => calibrate_cmd(a, cfg),
        Command::Score(a) => score_cmd(a, cfg),
        Command::Verify(a) => verify_cmd(a, cfg),
        Command::Dispute(a) => dispute_cmd(a, cfg),
        Command::EstimateAlign(a) => estimate_align_cmd(a, cfg),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Attack(a) => attack_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::CorrMap(a) => corr_map_cmd(a, cfg),
        Command::ZkProve(a) => zk_prove_cmd(a, cfg),
        Command::ZkVerify(a) => zk_verify_cmd(a, cfg),
    }
}

/// Core errors caused by bad parameters are usage errors; the rest are runtime.
fn classify(e: Error) -> anyhow::Error {
    match e {
        Error::OutOfRange(_) | Error::InvalidTransform(_) | Error::Shape(_) => usage(e.to_string()),
        other => other.into(),
    }
}

#[derive(Debug, Args)]
pub struct SeedArgs {
    /// Seed file (NPS1).
    #[arg(long, value_name = "FILE", conflicts_with_all = ["s_priv", "s_pub"])]
    seed: Option<PathBuf>,
    /// Private seed as 64 hex characters (use with --s-pub).
    #[arg(long, value_name = "HEX", requires = "s_pub")]
    s_priv: Option<String>,
    /// Public ownership string.
    #[arg(long, value_name = "TEXT", requires = "s_priv")]
    s_pub: Option<String>,
}

impl SeedArgs {
    fn load(&self) -> Result<SeedRecord> {
        match (&self.seed, &self.s_priv, &self.s_pub) {
            (Some(path), _, _) => {
                read_seed(path).with_context(|| format!("reading seed {}", path.display()))
            }
            (None, Some(hex), Some(s_pub)) => {
                SeedRecord::from_hex(hex, s_pub.clone()).map_err(|e| usage(e.to_string()))
            }
            _ => Err(usage("a seed is required: --seed FILE or --s-priv HEX --s-pub TEXT")),
        }
    }
}

fn parse_shape(s: &str) -> std::result::Result<(usize, usize, usize), String> {
    let parts: Vec<usize> = s
        .split([',', 'x'])
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| format!("shape '{s}': {e}"))?;
    match parts[..] {
        [c, h, w] if c > 0 && h > 0 && w > 0 => Ok((c, h, w)),
        _ => Err(format!("shape '{s}' must be C,H,W with positive entries")),
    }
}

fn parse_attack(s: &str) -> std::result::Result<AttackSpec, String> {
    let (kind, sev) = match s.split_once(':') {
        Some((k, v)) => (k, Some(v)),
        None => (s, None),
    };
    let kind: AttackKind = kind.trim().parse().map_err(|e: Error| e.to_string())?;
    let severity = match sev {
        Some(v) => v.trim().parse::<f64>().map_err(|e| format!("severity '{v}': {e}"))?,
        None if kind == AttackKind::None => 0.0,
        None => return Err(format!("attack '{s}' needs a severity: KIND:SEVERITY")),
    };
    let spec = AttackSpec::new(kind, severity);
    // seeds are supplied later; only the severity range is checked here
    spec.clone()
        .with_seed(SeedRecord::new([0; 32], ""))
        .validate()
        .map_err(|e| e.to_string())?;
    Ok(spec)
}

fn parse_transform(s: &str) -> std::result::Result<TransformSpec, String> {
    serde_json::from_str(s).map_err(|e| format!("transform JSON: {e}"))
}

fn load_tensor(path: &Path) -> Result<LatentTensor> {
    read_tensor(path).with_context(|| format!("reading tensor {}", path.display()))
}

fn save_tensor(path: &Path, t: &LatentTensor) -> Result<()> {
    write_tensor(path, t).with_context(|| format!("writing tensor {}", path.display()))
}

fn tensor_digest(t: &LatentTensor) -> String {
    hex::encode(sha256(&t.to_bytes()))
}

fn pass_code(pass: bool) -> u8 {
    if pass {
        EXIT_ACCEPT
    } else {
        EXIT_REJECT
    }
}

fn verdict_word(pass: bool) -> &'static str {
    if pass {
        "accept"
    } else {
        "reject"
    }
}

fn noise_for(cfg: &RunConfig, chunks: Option<usize>, x: &LatentTensor) -> Result<NoiseSpec> {
    cfg.noise_spec(chunks, x.dim())
}

// derive

#[derive(Debug, Args)]
pub struct DeriveArgs {
    #[command(flatten)]
    seed: SeedArgs,
    /// Tensor shape C,H,W.
    #[arg(long, value_parser = parse_shape, default_value = "4,64,64")]
    shape: (usize, usize, usize),
    /// Number of noise chunks (default: 512-entry chunks when L allows, else 1).
    #[arg(long)]
    chunks: Option<usize>,
    /// Write the noise tensor (NPT1).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also write the seed as an NPS1 file.
    #[arg(long, value_name = "FILE")]
    seed_out: Option<PathBuf>,
}

fn derive_cmd(a: DeriveArgs, cfg: &RunConfig) -> Result<Report> {
    let seed = a.seed.load()?;
    let (c, h, w) = a.shape;
    let spec = cfg.noise_spec(a.chunks, c * h * w)?;
    let eps = derive_noise(&seed, &spec, a.shape).map_err(classify)?;
    if let Some(out) = &a.out {
        save_tensor(out, &eps)?;
    }
    if let Some(out) = &a.seed_out {
        write_seed(out, &seed).with_context(|| format!("writing seed {}", out.display()))?;
    }
    let digest = tensor_digest(&eps);
    let json = json!({
        "command": "derive",
        "s_pub": seed.s_pub,
        "shape": [c, h, w],
        "total_length": spec.total_length,
        "chunk_count": spec.chunk_count,
        "norm": eps.norm(),
        "sha256": digest,
    });
    let mut text = format!(
        "derived {c}x{h}x{w} noise for '{}' in {} chunks\nnorm {:.6}\nsha256 {digest}\n",
        seed.s_pub,
        spec.chunk_count,
        eps.norm()
    );
    if let Some(out) = &a.out {
        let _ = writeln!(text, "wrote {}", out.display());
    }
    Ok(Report { json, text, code: EXIT_ACCEPT })
}

// calibrate

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Dimension d of the scored vectors.
    #[arg(long)]
    dim: Option<usize>,
    /// Target false-positive rate as a power of two, e.g. -128.
    #[arg(long, allow_negative_numbers = true)]
    fpr_log2: Option<i32>,
}

fn calibrate_cmd(a: CalibrateArgs, cfg: &RunConfig) -> Result<Report> {
    let dim = a
        .dim
        .or(cfg.dim)
        .ok_or_else(|| usage("--dim is required"))?;
    let e = match (a.fpr_log2, cfg.fpr_log2) {
        (Some(e), _) => e,
        (None, Some(f)) if f.fract() == 0.0 => f as i32,
        (None, Some(f)) => return Err(usage(format!("fpr_log2 {f} must be an integer"))),
        (None, None) => return Err(usage("--fpr-log2 is required")),
    };
    let p = calibrate_threshold(dim, Fpr::from_log2(e)).map_err(classify)?;
    let json = json!({
        "command": "calibrate",
        "dimension_d": dim,
        "fpr_log2": e,
        "tau": p.tau,
        "achieved_log2_fpr": p.achieved_log2_fpr(),
    });
    let text = format!(
        "{:.6}\nd = {dim}, target log2 FPR = {e}, achieved log2 FPR = {:.6}\n",
        p.tau,
        p.achieved_log2_fpr()
    );
    Ok(Report { json, text, code: EXIT_ACCEPT })
}

// score

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Content tensor (NPT1).
    #[arg(long, value_name = "FILE")]
    content: PathBuf,
    #[command(flatten)]
    seed: SeedArgs,
    #[command(flatten)]
    threshold: ThresholdArgs,
    /// Transform applied to the content before scoring, as JSON,
    /// e.g. '{"kind":"rotation","angle_degrees":-30}'.
    #[arg(long, value_parser = parse_transform)]
    transform: Option<TransformSpec>,
    /// Number of noise chunks.
    #[arg(long)]
    chunks: Option<usize>,
}

fn score_cmd(a: ScoreArgs, cfg: &RunConfig) -> Result<Report> {
    let x = load_tensor(&a.content)?;
    let seed = a.seed.load()?;
    let th = a.threshold.resolve(cfg, x.dim())?;
    let spec = noise_for(cfg, a.chunks, &x)?;
    let eps = derive_noise(&seed, &spec, x.shape()).map_err(classify)?;
    let (phi, coverage) = match &a.transform {
        Some(g) if !g.is_identity() => extended_score(&x, &eps, g).map_err(classify)?,
        _ => (noiseprint_score(&x, &eps).map_err(classify)?, 1.0),
    };
    let pass = phi >= th.tau;
    let le = low_entropy_warning(&x, th.tau, phi);
    let json = json!({
        "command": "score",
        "phi": phi,
        "tau": th.tau,
        "threshold": th,
        "dimension_d": x.dim(),
        "pass": pass,
        "masked_fraction": coverage,
        "transform": a.transform,
        "low_entropy": le,
    });
    let mut text = format!(
        "phi = {phi:.6}, tau = {:.6}, margin = {:+.6}: {}\n",
        th.tau,
        phi - th.tau,
        verdict_word(pass)
    );
    if coverage < 1.0 {
        let _ = writeln!(text, "mask covers {:.4} of the frame", coverage);
    }
    if le.warning {
        let _ = writeln!(
            text,
            "warning: low-entropy content ({:.2} of blocks flat, margin {:+.4})",
            le.low_variance_block_fraction, le.margin
        );
    }
    Ok(Report { json, text, code: pass_code(pass) })
}

// verify

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Claim file (JSON).
    #[arg(long, value_name = "FILE")]
    claim: PathBuf,
    #[command(flatten)]
    threshold: ThresholdArgs,
    /// Append the verdict to this JSON-lines registry.
    #[arg(long, value_name = "FILE")]
    registry: Option<PathBuf>,
    /// Number of noise chunks.
    #[arg(long)]
    chunks: Option<usize>,
}

fn verify_cmd(a: VerifyArgs, cfg: &RunConfig) -> Result<Report> {
    let (claim, resolved) = Claim::load_resolved(&a.claim)
        .with_context(|| format!("loading claim {}", a.claim.display()))?;
    let x = &resolved.content;
    let th = a.threshold.resolve(cfg, x.dim())?;
    let spec = noise_for(cfg, a.chunks, x)?;
    let report = verify(x, &resolved.seed, th.tau, &spec).map_err(classify)?;
    let digest = hex::encode(claim.digest()?);
    if let Some(path) = a.registry.as_ref().or(cfg.registry.as_ref()) {
        registry_append(path, &claim, verdict_word(report.pass), Some(report.phi))
            .with_context(|| format!("appending to registry {}", path.display()))?;
    }
    let json = json!({
        "command": "verify",
        "claimant_id": claim.claimant_id,
        "claim_digest": digest,
        "verdict": verdict_word(report.pass),
        "report": report,
        "threshold": th,
    });
    let text = format!(
        "{}: {} (phi = {:.6}, tau = {:.6}, margin = {:+.6})\n",
        claim.claimant_id,
        verdict_word(report.pass),
        report.phi,
        report.tau,
        report.margin()
    );
    Ok(Report { json, text, code: pass_code(report.pass) })
}

// dispute

#[derive(Debug, Args)]
pub struct DisputeArgs {
    /// First claim file.
    #[arg(long, value_name = "FILE")]
    claim_a: PathBuf,
    /// Second claim file.
    #[arg(long, value_name = "FILE")]
    claim_b: PathBuf,
    #[command(flatten)]
    threshold: ThresholdArgs,
    /// Append one record per claimant to this JSON-lines registry.
    #[arg(long, value_name = "FILE")]
    registry: Option<PathBuf>,
    /// Number of noise chunks.
    #[arg(long)]
    chunks: Option<usize>,
}

fn dispute_cmd(a: DisputeArgs, cfg: &RunConfig) -> Result<Report> {
    let (claim_a, ra) = Claim::load_resolved(&a.claim_a)
        .with_context(|| format!("loading claim {}", a.claim_a.display()))?;
    let (claim_b, rb) = Claim::load_resolved(&a.claim_b)
        .with_context(|| format!("loading claim {}", a.claim_b.display()))?;
    let th = a.threshold.resolve(cfg, ra.content.dim())?;
    let spec = noise_for(cfg, a.chunks, &ra.content)?;
    let v = dispute(&ra, &rb, th.tau, &spec).map_err(classify)?;
    let (word_a, word_b, code, winner) = match v.winner {
        Winner::A => ("win", "lose", EXIT_ACCEPT, claim_a.claimant_id.as_str()),
        Winner::B => ("lose", "win", EXIT_REJECT, claim_b.claimant_id.as_str()),
        Winner::Unresolved => ("unresolved", "unresolved", EXIT_UNRESOLVED, "unresolved"),
    };
    if let Some(path) = a.registry.as_ref().or(cfg.registry.as_ref()) {
        registry_append(path, &claim_a, word_a, Some(v.self_a.phi))
            .and_then(|_| registry_append(path, &claim_b, word_b, Some(v.self_b.phi)))
            .with_context(|| format!("appending to registry {}", path.display()))?;
    }
    let json = json!({
        "command": "dispute",
        "winner": v.winner,
        "claimant_a": claim_a.claimant_id,
        "claimant_b": claim_b.claimant_id,
        "verdict": v,
        "threshold": th,
    });
    let line = |id: &str, s: &noiseprints::ScoreReport, c: &noiseprints::ScoreReport| {
        format!(
            "{id}: self {:.6} ({}), cross {:.6} ({})\n",
            s.phi,
            if s.pass { "pass" } else { "fail" },
            c.phi,
            if c.pass { "pass" } else { "fail" }
        )
    };
    let mut text = format!("tau = {:.6}\n", th.tau);
    text += &line(&claim_a.claimant_id, &v.self_a, &v.cross_a);
    text += &line(&claim_b.claimant_id, &v.self_b, &v.cross_b);
    let _ = writeln!(text, "winner: {winner}");
    Ok(Report { json, text, code })
}

// estimate-align

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Family {
    Rotation,
    CropScale,
}

#[derive(Debug, Args)]
pub struct EstimateAlignArgs {
    /// The claimant's own content.
    #[arg(long, value_name = "FILE")]
    reference: PathBuf,
    /// The opponent's content, suspected to be a transformed copy.
    #[arg(long, value_name = "FILE")]
    transformed: PathBuf,
    /// Transform family to search.
    #[arg(long, value_enum, default_value = "rotation")]
    family: Family,
    #[command(flatten)]
    threshold: ThresholdArgs,
}

fn estimate_align_cmd(a: EstimateAlignArgs, cfg: &RunConfig) -> Result<Report> {
    let x = load_tensor(&a.reference)?;
    let y = load_tensor(&a.transformed)?;
    let th = a.threshold.resolve(cfg, x.dim())?;
    let family = match a.family {
        Family::Rotation => AlignmentFamily::Rotation,
        Family::CropScale => AlignmentFamily::CropScale,
    };
    match estimate_alignment(&x, &y, family, th.tau) {
        Ok(g) => {
            let declare = g.inverse(x.height(), x.width());
            let json = json!({
                "command": "estimate-align",
                "estimated": true,
                "forward": g,
                "declare": declare,
                "threshold": th,
            });
            let text = format!(
                "forward transform: {}\ndeclare in claim: {}\n",
                serde_json::to_string(&g)?,
                serde_json::to_string(&declare)?
            );
            Ok(Report { json, text, code: EXIT_ACCEPT })
        }
        Err(Error::EstimationFailed { best, required }) => {
            let json = json!({
                "command": "estimate-align",
                "estimated": false,
                "best_score": if best.is_finite() { Some(best) } else { None },
                "required": required,
                "threshold": th,
            });
            let text = format!(
                "no alignment found: best score {best:.6} below {required:.6}\n"
            );
            Ok(Report { json, text, code: EXIT_REJECT })
        }
        Err(e) => Err(classify(e)),
    }
}

// simulate

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    seed: SeedArgs,
    /// Target NoisePrint of the generated latent.
    #[arg(long, default_value_t = 0.482)]
    alpha: f64,
    /// Tensor shape C,H,W.
    #[arg(long, value_parser = parse_shape, default_value = "4,64,64")]
    shape: (usize, usize, usize),
    /// Low-pass cutoff of the structure field as a fraction of Nyquist.
    #[arg(long, default_value_t = 0.25)]
    cutoff: f64,
    /// Private seed (hex) of the structure field (default: derived from the seed).
    #[arg(long, value_name = "HEX")]
    structure_seed: Option<String>,
    /// Output tensor (NPT1).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

fn simulate_cmd(a: SimulateArgs) -> Result<Report> {
    let seed = a.seed.load()?;
    let structure = match &a.structure_seed {
        Some(hex) => SeedRecord::from_hex(hex, "structure").map_err(|e| usage(e.to_string()))?,
        None => seed.derive_child("structure", 0),
    };
    let spec = SyntheticSpec::new(a.alpha, a.cutoff, a.shape, structure);
    let z = synth_latent(&seed, &spec).map_err(classify)?;
    let eps = derive_noise(&seed, &NoiseSpec::canonical(z.dim()), z.shape()).map_err(classify)?;
    let phi = noiseprint_score(&z, &eps).map_err(classify)?;
    save_tensor(&a.out, &z)?;
    let (c, h, w) = a.shape;
    let json = json!({
        "command": "simulate",
        "shape": [c, h, w],
        "alpha": a.alpha,
        "phi": phi,
        "sha256": tensor_digest(&z),
    });
    let text = format!(
        "wrote {c}x{h}x{w} latent to {} (phi = {phi:.6})\n",
        a.out.display()
    );
    Ok(Report { json, text, code: EXIT_ACCEPT })
}

// attack

#[derive(Debug, Args)]
pub struct AttackArgs {
    /// Input tensor (NPT1).
    #[arg(long, value_name = "FILE")]
    content: PathBuf,
    /// Attack as KIND:SEVERITY, e.g. blur:1.5 or rotation:30.
    #[arg(long, value_parser = parse_attack)]
    attack: AttackSpec,
    /// Private seed (hex) for stochastic attacks.
    #[arg(long, value_name = "HEX")]
    attack_seed: Option<String>,
    /// Decorrelation: fraction of independent noise in the adversary's estimate.
    #[arg(long, default_value_t = 0.0)]
    estimate_mix: f64,
    /// Decorrelation: gradient steps.
    #[arg(long, default_value_t = 100)]
    steps: usize,
    /// Owner's seed: enables before/after scores and supplies the decorrelation target.
    #[command(flatten)]
    seed: SeedArgs,
    /// Output tensor (NPT1).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

fn attack_cmd(a: AttackArgs) -> Result<Report> {
    let z = load_tensor(&a.content)?;
    let owner = match (&a.seed.seed, &a.seed.s_priv) {
        (None, None) => None,
        _ => Some(a.seed.load()?),
    };
    let mut spec = a.attack.with_estimate_mix(a.estimate_mix);
    spec.steps = a.steps;
    if let Some(hex) = &a.attack_seed {
        spec = spec.with_seed(SeedRecord::from_hex(hex, "attack").map_err(|e| usage(e.to_string()))?);
    }
    let eps = owner
        .as_ref()
        .map(|s| derive_noise(s, &NoiseSpec::canonical(z.dim()), z.shape()))
        .transpose()
        .map_err(classify)?;
    let attacked = apply_attack(&z, &spec, eps.as_ref()).map_err(classify)?;
    save_tensor(&a.out, &attacked)?;
    let p = psnr(&z, &attacked)?;
    let s = ssim(&z, &attacked)?;
    let scores = eps
        .as_ref()
        .map(|e| -> Result<(f64, f64)> {
            Ok((noiseprint_score(&z, e)?, noiseprint_score(&attacked, e)?))
        })
        .transpose()?;
    let json = json!({
        "command": "attack",
        "attack": spec.kind,
        "severity": spec.severity,
        "psnr_db": if p.is_finite() { Some(p) } else { None },
        "ssim": s,
        "phi_before": scores.map(|s| s.0),
        "phi_after": scores.map(|s| s.1),
        "sha256": tensor_digest(&attacked),
    });
    let mut text = format!(
        "{}: PSNR {p:.2} dB, SSIM {s:.4}\nwrote {}\n",
        spec.label(),
        a.out.display()
    );
    if let Some((b, f)) = scores {
        let _ = writeln!(text, "phi {b:.6} -> {f:.6}");
    }
    Ok(Report { json, text, code: EXIT_ACCEPT })
}

// evaluate

const DEFAULT_SUITE: &[&str] = &[
    "none",
    "brightness:2",
    "contrast:0.5",
    "blur:1",
    "noise:0.5",
    "quantize:25",
    "resize:0.5",
    "renoise:0.3",
    "rotation:15",
    "crop_scale:0.8",
];

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Master seed; trial seeds are derived from it.
    #[command(flatten)]
    seed: SeedArgs,
    /// Trials per attack.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// NoisePrint of the clean synthetic latents.
    #[arg(long, default_value_t = 0.482)]
    alpha: f64,
    /// Latent shape C,H,W.
    #[arg(long, value_parser = parse_shape, default_value = "4,64,64")]
    shape: (usize, usize, usize),
    /// Attack as KIND:SEVERITY; repeatable. Default: a fixed suite of all
    /// non-adaptive attacks.
    #[arg(long = "attack", value_parser = parse_attack)]
    attacks: Vec<AttackSpec>,
    /// False-positive rates as powers of two.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true,
          default_value = "-10,-32,-64,-128")]
    fpr_log2: Vec<i32>,
    /// Write the report as CSV.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
}

fn fmt_psnr(p: f64) -> String {
    if p.is_finite() {
        format!("{p:.2}")
    } else {
        "inf".into()
    }
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<Report> {
    if a.trials == 0 {
        return Err(usage("--trials must be positive"));
    }
    let master = a.seed.load()?;
    let attacks = if a.attacks.is_empty() {
        DEFAULT_SUITE
            .iter()
            .map(|s| parse_attack(s).map_err(usage))
            .collect::<Result<Vec<_>>>()?
    } else {
        a.attacks
    };
    let mut cfg = EvalConfig::new(master, a.trials, a.alpha, attacks);
    cfg.shape = a.shape;
    cfg.fpr_log2_grid = a.fpr_log2;
    let report = evaluate_robustness(&cfg).map_err(classify)?;
    if let Some(path) = &a.csv {
        report
            .write_csv(path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let mut text = format!(
        "d = {}, alpha = {}, {} trials per attack\n",
        report.dimension_d, report.alpha, a.trials
    );
    let mut header = format!("{:<20} {:>10} {:>8}", "attack", "PSNR dB", "SSIM");
    if let Some(first) = report.cells.first() {
        for &(f, _, _) in &first.tpr {
            let _ = write!(header, " {:>9}", format!("TPR@2^{f}"));
        }
    }
    let _ = writeln!(text, "{header}");
    for c in &report.cells {
        let label = format!("{}@{}", c.attack, c.severity);
        let _ = write!(
            text,
            "{label:<20} {:>10} {:>8.4}",
            fmt_psnr(c.mean_psnr_db),
            c.mean_ssim
        );
        for &(_, _, tpr) in &c.tpr {
            let _ = write!(text, " {tpr:>9.3}");
        }
        text.push('\n');
    }
    if let Some(path) = &a.csv {
        let _ = writeln!(text, "wrote {}", path.display());
    }
    let json = json!({ "command": "evaluate", "report": report });
    Ok(Report { json, text, code: EXIT_ACCEPT })
}

// corr-map

#[derive(Debug, Args)]
pub struct CorrMapArgs {
    /// Content tensor (NPT1).
    #[arg(long, value_name = "FILE")]
    content: PathBuf,
    #[command(flatten)]
    seed: SeedArgs,
    /// Gaussian smoothing width in latent pixels.
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
    /// Mask threshold on the smoothed map.
    #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
    map_threshold: f64,
    /// Number of noise chunks.
    #[arg(long)]
    chunks: Option<usize>,
    /// Write the map as a 1xHxW tensor (NPT1).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Write the mask as a binary PGM.
    #[arg(long, value_name = "FILE")]
    mask_out: Option<PathBuf>,
}

fn corr_map_cmd(a: CorrMapArgs, cfg: &RunConfig) -> Result<Report> {
    let x = load_tensor(&a.content)?;
    let seed = a.seed.load()?;
    let spec = noise_for(cfg, a.chunks, &x)?;
    let eps = derive_noise(&seed, &spec, x.shape()).map_err(classify)?;
    let map = correlation_map(&x, &eps, a.sigma, a.map_threshold).map_err(classify)?;
    if let Some(out) = &a.out {
        save_tensor(out, &map.to_tensor()?)?;
    }
    if let Some(out) = &a.mask_out {
        std::fs::write(out, map.mask_pgm())
            .with_context(|| format!("writing {}", out.display()))?;
    }
    let covered = map.mask.iter().filter(|&&b| b).count() as f64 / map.mask.len() as f64;
    let (lo, hi) = map
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let json = json!({
        "command": "corr-map",
        "height": map.height,
        "width": map.width,
        "mean": map.mean(),
        "min": lo,
        "max": hi,
        "mask_fraction": covered,
    });
    let text = format!(
        "{}x{} map: mean {:.6}, range [{lo:.4}, {hi:.4}], {:.1}% above {}\n",
        map.height,
        map.width,
        map.mean(),
        100.0 * covered,
        a.map_threshold
    );
    Ok(Report { json, text, code: EXIT_ACCEPT })
}

// zk-prove / zk-verify

#[derive(Debug, Args)]
pub struct ZkProveArgs {
    /// Content tensor (NPT1).
    #[arg(long, value_name = "FILE")]
    content: PathBuf,
    #[command(flatten)]
    seed: SeedArgs,
    #[command(flatten)]
    threshold: ThresholdArgs,
    /// Field configuration (TOML).
    #[arg(long, value_name = "FILE")]
    field_config: Option<PathBuf>,
    /// Number of noise chunks.
    #[arg(long)]
    chunks: Option<usize>,
    /// Output bundle (JSON).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

fn zk_prove_cmd(a: ZkProveArgs, cfg: &RunConfig) -> Result<Report> {
    let x = load_tensor(&a.content)?;
    let seed = a.seed.load()?;
    let th = a.threshold.resolve(cfg, x.dim())?;
    let spec = noise_for(cfg, a.chunks, &x)?;
    let field = cfg.field_config(a.field_config.as_deref(), spec)?;
    let bundle = zk_prove_emulated(&seed, &x, th.tau, &field).map_err(classify)?;
    let verdict = zk_verify_emulated(&bundle, &x, &seed.s_pub, th.tau)?;
    std::fs::write(&a.out, bundle.to_json()?)
        .with_context(|| format!("writing {}", a.out.display()))?;
    let pass = verdict.is_ok();
    let json = json!({
        "command": "zk-prove",
        "chunks": bundle.chunks.len(),
        "cosine": bundle.cosine(),
        "tau": th.tau,
        "pass": pass,
        "failed_constraint": verdict.err().map(|v| v.to_string()),
    });
    let text = format!(
        "wrote bundle with {} chunks to {}\nfixed-point cosine {:.6} vs tau {:.6}: {}\n\
         note: emulated bundle, contains the private seed\n",
        bundle.chunks.len(),
        a.out.display(),
        bundle.cosine(),
        th.tau,
        verdict_word(pass)
    );
    Ok(Report { json, text, code: pass_code(pass) })
}

#[derive(Debug, Args)]
pub struct ZkVerifyArgs {
    /// Proof bundle (JSON).
    #[arg(long, value_name = "FILE")]
    bundle: PathBuf,
    /// Content tensor the proof is about (NPT1).
    #[arg(long, value_name = "FILE")]
    content: PathBuf,
    /// Expected public ownership string.
    #[arg(long, value_name = "TEXT")]
    s_pub: String,
    #[command(flatten)]
    threshold: ThresholdArgs,
}

fn zk_verify_cmd(a: ZkVerifyArgs, cfg: &RunConfig) -> Result<Report> {
    let text = std::fs::read_to_string(&a.bundle)
        .with_context(|| format!("reading bundle {}", a.bundle.display()))?;
    let bundle = ProofBundle::from_json(&text)
        .with_context(|| format!("parsing bundle {}", a.bundle.display()))?;
    let x = load_tensor(&a.content)?;
    let th = a.threshold.resolve(cfg, x.dim())?;
    let verdict = zk_verify_emulated(&bundle, &x, &a.s_pub, th.tau)?;
    let pass = verdict.is_ok();
    let failed = verdict.err().map(|v| v.to_string());
    let json = json!({
        "command": "zk-verify",
        "verdict": verdict_word(pass),
        "tau": th.tau,
        "failed_constraint": failed,
    });
    let mut text = format!("{}\n", verdict_word(pass));
    if let Some(f) = &failed {
        let _ = writeln!(text, "violated: {f}");
    }
    Ok(Report { json, text, code: pass_code(pass) })
}
