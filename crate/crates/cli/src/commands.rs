use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use burger_core::check::{argsort_invariance, gradient_suite, posterior_algebra};
use burger_core::denoise::{
    build_enhanced_slice, order_statistic_check, BaseDistribution, CheckOutcome, PriorMode,
};
use burger_core::eval::{evaluate, robustness_harness};
use burger_core::graph::{
    read_edge_list, symmetric_normalize, write_edge_list, write_social_graph, SocialGraph,
    SocialTensor,
};
use burger_core::ingest::{
    generate_synthetic, load_interactions, load_social_for_users, split_dataset, Dataset,
    SplitConfig, SyntheticSpec,
};
use burger_core::propagation::{propagate_user_item, EmbeddingState};
use burger_core::trainer::{self, normalize_tensor, Model, RunResult, TrainRunConfig};
use burger_core::Error;

use crate::output::{config_hash, OutputDir};
use crate::{
    CheckArgs, ConfigArgs, DenoiseArgs, EvalArgs, Failure, IngestArgs, RobustnessArgs, SplitArgs,
    SynthArgs, TrainArgs,
};

type CmdResult = Result<(), Failure>;

fn split_config(op: &'static str, a: &SplitArgs) -> Result<SplitConfig, Failure> {
    Ok(SplitConfig {
        ratio: a.ratio,
        negatives: a
            .negatives
            .parse()
            .map_err(|e: String| Failure::validation(op, e))?,
        seed: a.split_seed,
    })
}

fn split_text(s: &SplitConfig) -> String {
    format!(
        "ratio={}\nnegatives={}\nsplit_seed={}\n",
        s.ratio, s.negatives, s.seed
    )
}

/// Accepts either a dataset directory or the output directory holding one.
fn load_dataset(path: &Path) -> Result<Dataset, Failure> {
    let nested = path.join("dataset");
    let dir = if nested.join("manifest.txt").exists() {
        nested
    } else {
        path.to_owned()
    };
    Ok(Dataset::load(&dir)?)
}

fn build_config(op: &'static str, a: &ConfigArgs) -> Result<TrainRunConfig, Failure> {
    let mut config = match &a.preset {
        Some(name) => TrainRunConfig::preset(name)?,
        None => TrainRunConfig::default(),
    };
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::validation(op, format!("{}: {e}", path.display())))?;
        config = config.apply_text(path, &text)?;
    }
    for s in &a.sets {
        let (k, v) = s.split_once('=').ok_or_else(|| {
            Failure::validation(op, format!("--set expects key=value, got `{s}`"))
        })?;
        config.set(k.trim(), v)?;
    }
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn provenance(config: &TrainRunConfig, dataset: &Dataset) -> String {
    format!(
        "config={} seed={} split_seed={}",
        config_hash(&config.render()),
        config.seed,
        dataset.split.seed
    )
}

fn io_error(op: &'static str, path: PathBuf) -> impl FnOnce(std::io::Error) -> Failure {
    move |e| Failure::runtime(op, format!("{}: {e}", path.display()))
}

pub fn ingest(a: IngestArgs) -> CmdResult {
    const OP: &str = "cli::ingest";
    let split = split_config(OP, &a.split)?;
    let loaded = load_interactions(&a.interactions)?;
    let social = load_social_for_users(&a.social, &loaded.users)?;
    if social.dropped_self_loops + social.dropped_unknown > 0 {
        log::warn!(
            "{OP}: dropped {} self-loops and {} pairs with unknown users",
            social.dropped_self_loops,
            social.dropped_unknown
        );
    }
    let dataset = split_dataset(&loaded.graph, &social.graph, split)?;
    let prov = format!(
        "config={} split_seed={}",
        config_hash(&split_text(&split)),
        split.seed
    );
    let mut out = OutputDir::create(OP, &a.out.out, a.out.force, prov)?;
    dataset.save(&out.path("dataset"))?;
    out.record("dataset");
    loaded.users.write_tsv(&out.path("user_ids.tsv"))?;
    out.record("user_ids.tsv");
    loaded.items.write_tsv(&out.path("item_ids.tsv"))?;
    out.record("item_ids.tsv");
    out.flush()
        .map_err(io_error(OP, out.path("manifest.txt")))?;
    println!(
        "{} users, {} items, {} train interactions, {} social edges, {} evaluated users",
        dataset.num_users(),
        dataset.num_items(),
        dataset.train.num_edges(),
        dataset.social.num_edges(),
        dataset.eval_users().count()
    );
    Ok(())
}

pub fn synth(a: SynthArgs) -> CmdResult {
    const OP: &str = "cli::synth";
    let spec = SyntheticSpec {
        num_users: a.users,
        num_items: a.items,
        num_communities: a.communities,
        interaction_intra: a.interaction_intra,
        interaction_inter: a.interaction_inter,
        social_intra: a.social_intra,
        social_inter: a.social_inter,
        noise_ratio: a.noise_ratio,
        subgroups: a.subgroups,
        subgroup_boost: a.subgroup_boost,
        seed: a.seed,
    };
    let split = split_config(OP, &a.split)?;
    let data = generate_synthetic(&spec)?;
    let dataset = split_dataset(&data.interactions, &data.social, split)?;
    let prov = format!(
        "config={} seed={} split_seed={}",
        config_hash(&format!("{spec:?}\n{}", split_text(&split))),
        spec.seed,
        split.seed
    );
    let mut out = OutputDir::create(OP, &a.out.out, a.out.force, prov)?;

    let mut inter = String::new();
    for (u, i) in data.interactions.edges() {
        let _ = writeln!(inter, "{u}\t{i}");
    }
    out.write("interactions.tsv", inter)?;
    let mut social = String::new();
    for (u, v) in data.social.undirected_edges() {
        let _ = writeln!(social, "{u}\t{v}");
    }
    out.write("social.tsv", social)?;
    write_social_graph(&out.path("clean_social.edges"), &data.clean_social)?;
    out.record("clean_social.edges");
    write_edge_list(&out.path("noise.edges"), &data.noise.sorted())?;
    out.record("noise.edges");
    let mut groups = String::from("user\tcommunity\tgroup\n");
    for u in 0..spec.num_users {
        let _ = writeln!(
            groups,
            "{u}\t{}\t{}",
            data.user_community[u], data.user_group[u]
        );
    }
    out.write("communities.tsv", groups)?;
    dataset.save(&out.path("dataset"))?;
    out.record("dataset");
    out.flush()
        .map_err(io_error(OP, out.path("manifest.txt")))?;
    println!(
        "{} interactions, {} clean social edges, {} noise edges",
        data.interactions.num_edges(),
        data.clean_social.num_edges(),
        data.noise.len()
    );
    Ok(())
}

/// Trains one configuration into `out`, writing each enhanced slice as it
/// is produced and the snapshot only once the run has finished.
fn train_one(
    dataset: &Dataset,
    config: &TrainRunConfig,
    out: &mut OutputDir,
) -> Result<RunResult, Failure> {
    const OP: &str = "cli::train";
    out.write("config.txt", config.render())?;
    out.flush()
        .map_err(io_error(OP, out.path("manifest.txt")))?;
    let result = trainer::run_with(dataset, config, |event| {
        if let Some(fusion) = event.fusion {
            let x = event.iteration;
            write_social_graph(&out.path(&format!("slice_{x}.edges")), &fusion.graph)?;
            out.record(&format!("slice_{x}.edges"));
            fusion.write_changes(&out.path(&format!("changes_{x}.csv")))?;
            out.record(&format!("changes_{x}.csv"));
        }
        let path = out.path("manifest.txt");
        out.flush().map_err(|source| Error::Io {
            op: OP,
            path,
            source,
        })
    });
    let result = match result {
        Ok(r) => r,
        Err(Error::NonFinite { param, step, batch }) => {
            if let Some(batch) = &batch {
                let mut dump = String::from("anchor,positive,negative\n");
                for &(a, p, n) in batch.iter() {
                    let _ = writeln!(dump, "{a},{p},{n}");
                }
                out.write("nonfinite_batch.csv", dump)?;
                out.flush()
                    .map_err(io_error(OP, out.path("manifest.txt")))?;
            }
            return Err(Error::NonFinite { param, step, batch }.into());
        }
        Err(e) => return Err(e.into()),
    };
    result.log.write_csv(&out.path("runlog.csv"))?;
    out.record("runlog.csv");
    out.write("metrics.json", result.summary_json(config))?;
    result.tensor.save(&out.path("tensor"))?;
    out.record("tensor");
    result.best_state().save(&out.path("snapshot.bin"))?;
    out.record("snapshot.bin");
    out.flush()
        .map_err(io_error(OP, out.path("manifest.txt")))?;
    Ok(result)
}

fn parse_grid(op: &'static str, axes: &[String]) -> Result<Vec<(String, Vec<String>)>, Failure> {
    axes.iter()
        .map(|axis| {
            let (k, vs) = axis.split_once('=').ok_or_else(|| {
                Failure::validation(op, format!("--grid expects key=v1,v2,..., got `{axis}`"))
            })?;
            let values: Vec<String> = vs
                .split(',')
                .map(|v| v.trim().to_owned())
                .filter(|v| !v.is_empty())
                .collect();
            if values.is_empty() {
                return Err(Failure::validation(
                    op,
                    format!("grid axis `{k}` has no values"),
                ));
            }
            Ok((k.trim().to_owned(), values))
        })
        .collect()
}

/// Every combination of one value per axis, first axis slowest.
fn combinations(axes: &[(String, Vec<String>)]) -> Vec<Vec<&str>> {
    axes.iter().fold(vec![Vec::new()], |acc, (_, values)| {
        acc.iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut next = prefix.clone();
                    next.push(v.as_str());
                    next
                })
            })
            .collect()
    })
}

fn best_summary(result: &RunResult) -> (usize, f64, f64, f64) {
    result.best.as_ref().map_or((0, 0.0, 0.0, 0.0), |b| {
        (b.iteration, b.metrics.hr1, b.metrics.hr3, b.metrics.ndcg3)
    })
}

pub fn train(a: TrainArgs) -> CmdResult {
    const OP: &str = "cli::train";
    let dataset = load_dataset(&a.data)?;
    let base = build_config(OP, &a.config)?;
    let axes = parse_grid(OP, &a.grid)?;

    if axes.is_empty() {
        let mut out = OutputDir::create(OP, &a.out.out, a.out.force, provenance(&base, &dataset))?;
        let result = train_one(&dataset, &base, &mut out)?;
        let (iteration, hr1, hr3, ndcg3) = best_summary(&result);
        println!("best iteration {iteration}: hr@1 {hr1:.4} hr@3 {hr3:.4} ndcg@3 {ndcg3:.4}");
        return Ok(());
    }

    let combos = combinations(&axes);
    let mut configs = Vec::with_capacity(combos.len());
    for combo in &combos {
        let mut c = base.clone();
        for ((key, _), value) in axes.iter().zip(combo) {
            c.set(key, value)?;
        }
        c.validate()?;
        configs.push(c);
    }
    let mut root = OutputDir::create(OP, &a.out.out, a.out.force, provenance(&base, &dataset))?;
    let mut table = String::new();
    for (key, _) in &axes {
        let _ = write!(table, "{key},");
    }
    table.push_str("run,best_iteration,hr1,hr3,ndcg3\n");
    for (k, (config, combo)) in configs.iter().zip(&combos).enumerate() {
        let name = format!("run_{k}");
        log::info!("{OP}: {name}: {}", combo.join(" "));
        let mut out = OutputDir::create(
            OP,
            &root.path(&name),
            a.out.force,
            provenance(config, &dataset),
        )?;
        let result = train_one(&dataset, config, &mut out)?;
        root.record(&name);
        let (iteration, hr1, hr3, ndcg3) = best_summary(&result);
        let _ = writeln!(
            table,
            "{},{name},{iteration},{hr1},{hr3},{ndcg3}",
            combo.join(",")
        );
        // keep the partial table on disk
        fs::write(root.path("grid.csv"), &table).map_err(io_error(OP, root.path("grid.csv")))?;
    }
    root.record("grid.csv");
    root.flush()
        .map_err(io_error(OP, root.path("manifest.txt")))?;
    print!("{table}");
    Ok(())
}

/// Snapshot, config and dataset of a finished run, checked for agreement.
fn load_run(
    op: &'static str,
    run: &Path,
    data: &Path,
) -> Result<(EmbeddingState, TrainRunConfig, Dataset), Failure> {
    let state = EmbeddingState::load(&run.join("snapshot.bin"))?;
    let config = TrainRunConfig::read(&run.join("config.txt"))?;
    let dataset = load_dataset(data)?;
    if state.users.nrows() != dataset.num_users() || state.items.nrows() != dataset.num_items() {
        return Err(Failure::validation(
            op,
            format!(
                "snapshot has {} users and {} items, dataset {} and {}",
                state.users.nrows(),
                state.items.nrows(),
                dataset.num_users(),
                dataset.num_items()
            ),
        ));
    }
    Ok((state, config, dataset))
}

pub fn eval(a: EvalArgs) -> CmdResult {
    const OP: &str = "cli::eval";
    let (state, config, dataset) = load_run(OP, &a.run, &a.data)?;
    let adj = symmetric_normalize(&dataset.train);
    let pooled = propagate_user_item(&adj, state.users.view(), state.items.view(), config.layers)?;
    let report = evaluate(&dataset, pooled.users.view(), pooled.items.view())?;
    if let Some(dir) = &a.out {
        let mut out = OutputDir::create(OP, dir, a.force, provenance(&config, &dataset))?;
        out.write("metrics.json", report.to_json())?;
        report.write_ranks(&out.path("ranks.csv"))?;
        out.record("ranks.csv");
        out.flush()
            .map_err(io_error(OP, out.path("manifest.txt")))?;
    }
    println!("{}", report.to_json());
    Ok(())
}

/// Share of the arcs of `pairs` (both directions) present in `graph`.
fn arc_survival(graph: &SocialGraph, pairs: &[(usize, usize)]) -> f64 {
    if pairs.is_empty() {
        return f64::NAN;
    }
    let hits: usize = pairs
        .iter()
        .map(|&(a, b)| usize::from(graph.contains(a, b)) + usize::from(graph.contains(b, a)))
        .sum();
    hits as f64 / (2 * pairs.len()) as f64
}

pub fn denoise(a: DenoiseArgs) -> CmdResult {
    const OP: &str = "cli::denoise";
    let (state, mut config, dataset) = load_run(OP, &a.run, &a.data)?;
    if let Some(p) = &a.prior {
        config.prior = p.parse::<PriorMode>()?;
    }
    let tensor = SocialTensor::load(&a.run.join("tensor"))?;
    if tensor.num_users() != dataset.num_users() {
        return Err(Failure::validation(
            OP,
            "tensor and dataset disagree on the user count",
        ));
    }
    let adj = symmetric_normalize(&dataset.train);
    let slices = normalize_tensor(&tensor);
    let fwd = Model::new(&adj, &slices, &config).forward(&state)?;
    let fusion = build_enhanced_slice(
        fwd.interest.users.view(),
        fwd.social.users.view(),
        tensor.newest(),
        config.prior,
        a.symmetrize,
    )?;

    let mut out = OutputDir::create(OP, &a.out.out, a.out.force, provenance(&config, &dataset))?;
    write_social_graph(&out.path("slice_enhanced.edges"), &fusion.graph)?;
    out.record("slice_enhanced.edges");
    fusion.write_changes(&out.path("changes_enhanced.csv"))?;
    out.record("changes_enhanced.csv");
    let mut summary = serde_json::json!({
        "prior": config.prior.to_string(),
        "symmetrized": a.symmetrize,
        "kept": fusion.kept(),
        "dropped": fusion.dropped(),
        "added": fusion.added(),
    });
    if let Some(path) = &a.noise {
        let noise = read_edge_list(path)?;
        let newest = tensor.newest();
        let others: Vec<(usize, usize)> = newest
            .arcs()
            .filter(|&(u, v)| u < v || !newest.contains(v, u))
            .map(|(u, v)| (u.min(v), u.max(v)))
            .filter(|p| !noise.contains(p))
            .collect();
        summary["noise_survival"] = serde_json::json!(arc_survival(&fusion.graph, &noise));
        summary["other_survival"] = serde_json::json!(arc_survival(&fusion.graph, &others));
    }
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    out.write("denoise.json", &text)?;
    out.flush()
        .map_err(io_error(OP, out.path("manifest.txt")))?;
    println!("{text}");
    Ok(())
}

pub fn robustness(a: RobustnessArgs) -> CmdResult {
    const OP: &str = "cli::robustness";
    let dataset = load_dataset(&a.data)?;
    let config = build_config(OP, &a.config)?;
    let prov = format!(
        "{} noise_seed={}",
        provenance(&config, &dataset),
        a.noise_seed
    );
    let mut out = OutputDir::create(OP, &a.out.out, a.out.force, prov)?;
    out.write("config.txt", config.render())?;
    let table = robustness_harness(&dataset, &a.ratios, &config, a.noise_seed)?;
    out.write("robustness.csv", table.to_csv())?;
    out.flush()
        .map_err(io_error(OP, out.path("manifest.txt")))?;
    print!("{}", table.to_csv());
    Ok(())
}

pub fn check(a: CheckArgs) -> CmdResult {
    const OP: &str = "cli::check";
    let mut out = match &a.out {
        Some(dir) => Some(OutputDir::create(
            OP,
            dir,
            a.force,
            format!("config={} seed={}", config_hash(&format!("{a:?}")), a.seed),
        )?),
        None => None,
    };
    let mut failed = 0;
    let mut line = |ok: bool, text: String| {
        failed += usize::from(!ok);
        println!("{} {text}", if ok { "PASS" } else { "FAIL" });
    };

    let grads = gradient_suite(a.seed, a.trials)?;
    let mut names: Vec<&str> = grads.cases.iter().map(|c| c.name.as_str()).collect();
    names.dedup();
    names.sort_unstable();
    names.dedup();
    for name in names {
        let worst = grads.worst(name);
        line(
            worst < 1e-6,
            format!("gradient {name}: max relative error {worst:.2e}"),
        );
    }
    let gap = posterior_algebra()?;
    line(
        gap < 1e-12,
        format!("posterior closed form vs Bayes composition: max gap {gap:.2e}"),
    );
    let mismatches = argsort_invariance(1000, a.seed)?;
    line(
        mismatches == 0,
        format!("constant-prior selection vs similarity: {mismatches} mismatches in 1000"),
    );

    let mut reports = Vec::new();
    for (name, dist) in [
        ("uniform", BaseDistribution::Uniform),
        ("normal", BaseDistribution::STANDARD_NORMAL),
    ] {
        let r = order_statistic_check(a.samples, dist, a.seed)?;
        line(
            r.outcome == CheckOutcome::Pass,
            format!(
                "order statistics ({name}): KS friend {:.5} non-friend {:.5}, threshold {:.5}",
                r.friend_ks, r.non_friend_ks, r.threshold
            ),
        );
        reports.push((name, r));
    }

    if let Some(out) = &mut out {
        for (name, r) in &reports {
            let mut csv = String::from(
                "lo,hi,friend_empirical,friend_theory,non_friend_empirical,non_friend_theory\n",
            );
            for h in r.histogram(a.bins) {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    h.lo,
                    h.hi,
                    h.friend_empirical,
                    h.friend_theory,
                    h.non_friend_empirical,
                    h.non_friend_theory
                );
            }
            out.write(&format!("histogram_{name}.csv"), csv)?;
        }
        out.write(
            "gradients.json",
            serde_json::to_string_pretty(&grads).expect("report serializes"),
        )?;
        out.flush()
            .map_err(io_error(OP, out.path("manifest.txt")))?;
    }
    if failed > 0 {
        return Err(Failure::validation(OP, format!("{failed} checks failed")));
    }
    Ok(())
}
