use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::json;

use sentropy::fusion::{EtaSchedule, FamilyCompetitors, FusionOptions, OutputGrid};
use sentropy::io as formats;
use sentropy::selection::{EntropyOracle, MatrixOracle};
use sentropy::{
    build_family, check_polymatroid, empirical_entropy_vector_with_cap, greedy_selection,
    lz78_phrases, lz_entropy_vector, online_fusion_with, project_subset, random_selection,
    random_selection_guarantee, EntropyVector, Error, Estimator, FamilyKind, Loss, Result,
    SensorMatrix, SourceSpec, SubsetMask,
};

use crate::{AnalyzeArgs, FuseArgs, IngestArgs, SelectGreedyArgs, SelectRandomArgs, SimulateArgs};

const ORDER_TERM_NOTE: &str =
    "order term (2^k - 1)/sqrt(n) uses constant 1; the true constant is unknown";
const RESIDUAL_NOTE: &str =
    "the k*epsilon residual bound omits an o(1) estimation term for sampled-data oracles";

fn parse_estimator(name: &str) -> Estimator {
    match name {
        "lz" => Estimator::Lz,
        _ => Estimator::Empirical,
    }
}

fn load_matrix(args: &IngestArgs) -> Result<SensorMatrix> {
    let file = File::open(&args.input)?;
    let matrix = formats::load_matrix_csv(
        file,
        &formats::LoadOptions {
            bins: args.bins,
            alpha: args.alpha,
        },
    )?;
    if matrix.alphabet().is_degenerate() {
        eprintln!("note: alphabet size 1; every stream is constant and all entropies are 0");
    }
    Ok(matrix)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    file.flush()?;
    Ok(())
}

fn write_manifest(dir: &Path, command: &str, config: serde_json::Value) -> Result<()> {
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = json!({
        "tool": "sentropy",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": config,
        "created_unix": created,
    });
    write_json(&dir.join("manifest.json"), &manifest)
}

fn prepare_dir(dir: &PathBuf) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn requested_subsets(k: u32, masks: &Option<Vec<u64>>, cap: u32) -> Result<Option<Vec<SubsetMask>>> {
    match masks {
        Some(list) => {
            let subsets: Result<Vec<SubsetMask>> = list
                .iter()
                .map(|&bits| {
                    let mask = SubsetMask::from_bits(bits);
                    mask.validate(k).map(|_| mask)
                })
                .collect();
            Ok(Some(subsets?))
        }
        None => {
            if k > cap {
                return Err(Error::LatticeTooLarge { k, cap });
            }
            Ok(None)
        }
    }
}

fn print_entropy_table(vector: &EntropyVector) {
    let rows = vector.len();
    println!("{:>8}  {:<24} {:>14}", "mask", "members", "entropy_bits");
    for (mask, bits) in vector.evaluated().take(64) {
        println!("{:>8}  {:<24} {:>14.6}", mask.bits(), mask.label(), bits);
    }
    if rows > 64 {
        println!("  ... {} more rows in entropy.csv", rows - 64);
    }
}

pub fn analyze(args: AnalyzeArgs) -> Result<()> {
    let estimator = parse_estimator(&args.estimator);
    if args.phrases && estimator != Estimator::Lz {
        return Err(Error::Config(
            "--phrases needs --estimator lz (the empirical estimator has no parse)".into(),
        ));
    }
    let matrix = load_matrix(&args.ingest)?;
    let k = matrix.num_sensors() as u32;
    let subsets = requested_subsets(k, &args.subsets, args.lattice_cap)?;

    let vector = match estimator {
        Estimator::Empirical => {
            empirical_entropy_vector_with_cap(&matrix, subsets.as_deref(), args.lattice_cap)?
        }
        Estimator::Lz => {
            let list: Vec<SubsetMask> = match &subsets {
                Some(list) => list.clone(),
                None => SubsetMask::all_nonempty(k).collect(),
            };
            lz_entropy_vector(&matrix, &list)?
        }
    };

    prepare_dir(&args.output_dir)?;
    write_json(
        &args.output_dir.join("entropy.json"),
        &formats::entropy_vector_to_json(&vector),
    )?;
    formats::write_entropy_csv(
        BufWriter::new(File::create(args.output_dir.join("entropy.csv"))?),
        &vector,
    )?;

    let axioms = if vector.is_fully_evaluated() {
        let report = check_polymatroid(&vector, args.tolerance)?;
        println!(
            "polymatroid: {} (worst monotonicity {:+.3e}, worst submodularity {:+.3e}, tol {:.1e})",
            report.is_polymatroid,
            report.worst_monotonicity_violation,
            report.worst_submodularity_violation,
            report.tolerance
        );
        serde_json::to_value(&report)?
    } else {
        eprintln!("note: axiom check skipped; only {} subsets evaluated", vector.len());
        json!({ "skipped": "vector is not fully evaluated" })
    };
    write_json(&args.output_dir.join("axioms.json"), &axioms)?;

    if args.phrases {
        for (mask, _) in vector.evaluated() {
            let (projected, alphabet) = project_subset(&matrix, mask)?;
            let (_, phrases) = lz78_phrases(&projected, &alphabet)?;
            let path = args.output_dir.join(format!("phrases-{}.txt", mask.bits()));
            let mut file = BufWriter::new(File::create(path)?);
            file.write_all(sentropy::format_phrase_dump(&phrases).as_bytes())?;
            file.flush()?;
        }
    }

    println!(
        "analyzed {} subsets of K={} sensors (n={}, alpha={}, estimator={})",
        vector.len(),
        k,
        matrix.num_steps(),
        matrix.alphabet().size(),
        args.estimator
    );
    print_entropy_table(&vector);

    write_manifest(
        &args.output_dir,
        "analyze",
        json!({
            "input": args.ingest.input, "bins": args.ingest.bins, "alpha": args.ingest.alpha,
            "estimator": args.estimator, "subsets": args.subsets,
            "lattice_cap": args.lattice_cap, "tolerance": args.tolerance,
            "phrases": args.phrases, "output_dir": args.output_dir,
        }),
    )
}

pub fn select_random(args: SelectRandomArgs) -> Result<()> {
    let matrix = match &args.input {
        Some(path) => {
            let file = File::open(path)?;
            Some(formats::load_matrix_csv(
                file,
                &formats::LoadOptions {
                    bins: args.bins,
                    alpha: args.alpha,
                },
            )?)
        }
        None => None,
    };
    let k = match (&matrix, args.num_sensors) {
        (Some(m), _) => m.num_sensors() as u32,
        (None, Some(k)) => k,
        (None, None) => {
            return Err(Error::Config(
                "pass --input or --num-sensors to size the draw".into(),
            ))
        }
    };

    let estimator = parse_estimator(&args.estimator);
    let oracle = matrix.as_ref().map(|m| MatrixOracle::new(m, estimator));

    let mut draws = Vec::new();
    println!("{:>6} {:>8} {:<24} {:>5} {:>14} {:>10}", "seed", "mask", "members", "size", "entropy_bits", "defect");
    for trial in 0..args.trials {
        let seed = args.seed + trial;
        let mask = random_selection(k, args.q, seed)?;
        let (entropy, defect) = match (&oracle, mask.is_empty()) {
            (Some(oracle), false) => {
                let joint = oracle.joint_entropy(mask)?;
                let singles: Result<Vec<f64>> = mask
                    .sensors()
                    .map(|s| oracle.joint_entropy(SubsetMask::singleton(s)))
                    .collect();
                let defect = singles?.iter().sum::<f64>() - joint;
                (Some(joint), Some(defect))
            }
            _ => (None, None),
        };
        println!(
            "{:>6} {:>8} {:<24} {:>5} {:>14} {:>10}",
            seed,
            mask.bits(),
            mask.label(),
            mask.len(),
            entropy.map_or("-".into(), |e| format!("{e:.4}")),
            defect.map_or("-".into(), |d| format!("{d:.4}")),
        );
        draws.push(json!({
            "seed": seed,
            "mask": mask.bits(),
            "members": mask.label(),
            "size": mask.len(),
            "entropy_bits": entropy,
            "independence_defect_bits": defect,
        }));
    }

    let guarantee = match (args.guarantee_a, args.rank) {
        (Some(a), Some(rank)) => {
            let n = matrix.as_ref().map_or(1, |m| m.num_steps());
            let g = random_selection_guarantee(a, args.q, rank, k, n)?;
            println!(
                "guarantee: success floor {:.4} when the true matroid holds {:.2} disjoint bases ({})",
                g.success_probability_floor, g.required_disjoint_bases, ORDER_TERM_NOTE
            );
            let mut value = serde_json::to_value(&g)?;
            if matrix.is_none() {
                // The estimation term needs a data horizon.
                value["order_term"] = serde_json::Value::Null;
            }
            Some(value)
        }
        (None, None) => None,
        _ => {
            return Err(Error::Config(
                "--guarantee-a and --rank must be passed together".into(),
            ))
        }
    };

    prepare_dir(&args.output_dir)?;
    write_json(
        &args.output_dir.join("random.json"),
        &json!({
            "k": k, "q": args.q, "seed": args.seed, "trials": args.trials,
            "estimator": matrix.as_ref().map(|_| &args.estimator),
            "draws": draws,
            "guarantee": guarantee,
            "order_term_note": ORDER_TERM_NOTE,
        }),
    )?;
    write_manifest(
        &args.output_dir,
        "select-random",
        json!({
            "input": args.input, "bins": args.bins, "alpha": args.alpha,
            "num_sensors": args.num_sensors, "estimator": args.estimator,
            "q": args.q, "seed": args.seed, "trials": args.trials,
            "guarantee_a": args.guarantee_a, "rank": args.rank,
            "output_dir": args.output_dir,
        }),
    )
}

pub fn select_greedy(args: SelectGreedyArgs) -> Result<()> {
    let matrix = load_matrix(&args.ingest)?;
    let estimator = parse_estimator(&args.estimator);
    let oracle = MatrixOracle::new(&matrix, estimator);
    let trace = greedy_selection(&oracle, args.epsilon)?;

    println!("{:>4} {:>7} {:>14} {:>10}", "step", "sensor", "entropy_bits", "gain");
    for (index, step) in trace.steps.iter().enumerate() {
        println!(
            "{:>4} {:>7} {:>14.4} {:>10.4}",
            index + 1,
            step.label,
            step.entropy_bits,
            step.gain_bits
        );
    }
    println!(
        "final subset {} ({} bits); stopped_early={}, residual bound {} bits ({})",
        trace.final_subset,
        trace.final_entropy_bits,
        trace.stopped_early,
        trace.residual_bound_bits,
        RESIDUAL_NOTE
    );

    prepare_dir(&args.output_dir)?;
    write_json(
        &args.output_dir.join("greedy.json"),
        &json!({
            "estimator": args.estimator,
            "trace": serde_json::to_value(&trace)?,
            "residual_note": RESIDUAL_NOTE,
        }),
    )?;
    write_manifest(
        &args.output_dir,
        "select-greedy",
        json!({
            "input": args.ingest.input, "bins": args.ingest.bins, "alpha": args.ingest.alpha,
            "estimator": args.estimator, "epsilon": args.epsilon,
            "output_dir": args.output_dir,
        }),
    )
}

fn parse_family(text: &str) -> Result<FamilyKind> {
    if text == "pair-average" {
        return Ok(FamilyKind::PairAverage);
    }
    if text == "ordered-pairs" {
        return Ok(FamilyKind::OrderedPairAverage);
    }
    if let Some(m) = text.strip_prefix("max:") {
        if let Ok(m) = m.parse::<usize>() {
            return Ok(FamilyKind::MaxOfSubset(m));
        }
    }
    if let Some(m) = text.strip_prefix("median:") {
        if let Ok(m) = m.parse::<usize>() {
            return Ok(FamilyKind::MedianOfSubset(m));
        }
    }
    Err(Error::Config(format!(
        "unknown family `{text}`; use pair-average, ordered-pairs, max:M, or median:M"
    )))
}

pub fn fuse(args: FuseArgs) -> Result<()> {
    let bases = formats::load_real_matrix_csv(File::open(&args.input)?)?;
    let truth = formats::load_truth_csv(File::open(&args.truth)?)?;
    let kind = parse_family(&args.family)?;
    let family = build_family(kind, bases.len())?;
    let loss = match args.loss.as_str() {
        "hamming" => Loss::Hamming,
        _ => Loss::log_loss(args.delta)?,
    };
    let schedule = if args.doubling {
        EtaSchedule::Doubling
    } else if args.eta == "auto" {
        EtaSchedule::Auto
    } else {
        let eta = args.eta.parse::<f64>().map_err(|_| {
            Error::Config(format!("--eta must be `auto` or a number, got `{}`", args.eta))
        })?;
        EtaSchedule::Fixed(eta)
    };

    let options = FusionOptions {
        record_weights: true,
    };
    let competitors = FamilyCompetitors::new(bases, family.clone())?;
    let run = if args.lazy_members {
        online_fusion_with(&competitors, &truth, &loss, schedule, args.seed, &options)?
    } else {
        let grid: OutputGrid = competitors.expand();
        online_fusion_with(&grid, &truth, &loss, schedule, args.seed, &options)?
    };

    let mut order: Vec<usize> = (0..run.num_competitors).collect();
    order.sort_by(|&a, &b| run.final_weights[b].partial_cmp(&run.final_weights[a]).unwrap());
    let best_loss = run
        .per_competitor_loss
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    println!(
        "fused {} competitors ({} bases + {} synthesized) over {} steps",
        run.num_competitors,
        family.base_count,
        family.len(),
        run.horizon
    );
    println!(
        "algorithm loss {:.4}/step, best competitor {:.4}/step, regret {:.5} (bound {:.5})",
        run.algorithm_loss / run.horizon as f64,
        best_loss / run.horizon as f64,
        run.regret,
        run.regret_bound
    );
    for &j in order.iter().take(3) {
        let label = if j < family.base_count {
            format!("base s{}", j + 1)
        } else {
            format!("synthesized #{} {:?}", j, family.members[j - family.base_count])
        };
        println!("  weight {:.4}  {label}", run.final_weights[j]);
    }

    prepare_dir(&args.output_dir)?;
    write_json(
        &args.output_dir.join("fusion.json"),
        &json!({
            "family": serde_json::to_value(&family)?,
            "loss": serde_json::to_value(&loss)?,
            "eta_schedule": serde_json::to_value(&schedule)?,
            "run": serde_json::to_value(&run)?,
        }),
    )?;
    formats::write_weights_csv(
        BufWriter::new(File::create(args.output_dir.join("weights.csv"))?),
        &run.weight_history,
    )?;
    write_manifest(
        &args.output_dir,
        "fuse",
        json!({
            "input": args.input, "truth": args.truth, "family": args.family,
            "loss": args.loss, "delta": args.delta, "eta": args.eta,
            "doubling": args.doubling, "lazy_members": args.lazy_members,
            "seed": args.seed, "output_dir": args.output_dir,
        }),
    )
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.spec)?;
    let mut spec: SourceSpec = serde_json::from_str(&text)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let matrix = spec.generate(args.steps)?;

    prepare_dir(&args.output_dir)?;
    formats::write_matrix_csv(
        BufWriter::new(File::create(args.output_dir.join("matrix.csv"))?),
        &matrix,
    )?;

    match spec.analytic_entropy_vector() {
        Ok(vector) => {
            write_json(
                &args.output_dir.join("analytic.json"),
                &formats::entropy_vector_to_json(&vector),
            )?;
            println!("analytic oracle written ({} subsets)", vector.len());
        }
        Err(Error::NotMemoryless { what }) => {
            eprintln!("note: no analytic oracle; the spec contains a {what}");
        }
        Err(other) => return Err(other),
    }

    println!(
        "simulated {} sensors for {} steps (alphabet {}, seed {})",
        matrix.num_sensors(),
        matrix.num_steps(),
        matrix.alphabet().size(),
        spec.seed
    );
    write_manifest(
        &args.output_dir,
        "simulate",
        json!({
            "spec": args.spec, "steps": args.steps, "seed": spec.seed,
            "output_dir": args.output_dir,
        }),
    )
}
