use std::path::{Path, PathBuf};

use fabisearch::data::{load_matrix, save_matrix, write_binary_matrix, write_table, TableFormat};
use fabisearch::detection::{detect_cps, DetectionConfig, TestType};
use fabisearch::export::{export_network_json, AtlasTable, NodeFilter};
use fabisearch::network::{est_net, AdjacencyMatrix, AdjacencyMode, LambdaSpec};
use fabisearch::simulate::{simulate_dataset, SimulationSpec};
use fabisearch::{opt_rank, Algorithm, NmfConfig, TimeSeriesMatrix};
use serde::Serialize;

use crate::config::Settings;
use crate::{Cli, CliError, Command, DetectArgs, EstNetArgs, ExportArgs, InputArgs, NmfArgs, OptRankArgs, OutputFormat, SimulateArgs};

pub fn run(cli: Cli) -> Result<(), CliError> {
    let settings = Settings::load(cli.config.as_deref())?;
    let threads = match cli.threads {
        Some(t) => Some(t),
        None => settings.get::<usize>("", "threads")?,
    };
    if let Some(t) = threads.filter(|&t| t > 0) {
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let section = match &cli.command {
        Command::OptRank(_) => "opt-rank",
        Command::DetectCps(_) => "detect-cps",
        Command::EstNet(_) => "est-net",
        Command::Simulate(_) => "simulate",
        Command::ExportViewer(_) => "export-viewer",
    };
    let ctx = Context {
        settings,
        section,
        format: cli.output_format,
    };
    match cli.command {
        Command::OptRank(a) => cmd_opt_rank(&ctx, a),
        Command::DetectCps(a) => cmd_detect_cps(&ctx, a),
        Command::EstNet(a) => cmd_est_net(&ctx, a),
        Command::Simulate(a) => cmd_simulate(&ctx, a),
        Command::ExportViewer(a) => cmd_export_viewer(&ctx, a),
    }
}

struct Context {
    settings: Settings,
    section: &'static str,
    format: Option<OutputFormat>,
}

impl Context {
    fn output_format(&self) -> Result<OutputFormat, CliError> {
        self.settings
            .pick(self.format, self.section, "output_format", OutputFormat::Table)
    }

    fn load_input(&self, input: &InputArgs) -> Result<TimeSeriesMatrix, CliError> {
        let format = match &input.format {
            Some(f) => f.parse()?,
            None => match self.settings.get::<String>(self.section, "format")? {
                Some(f) => f.parse()?,
                None => TableFormat::from_path(&input.input),
            },
        };
        let header = input.header || self.settings.get(self.section, "header")?.unwrap_or(false);
        Ok(load_matrix(&input.input, format, header)?)
    }

    fn nmf_config(&self, a: &NmfArgs) -> Result<NmfConfig, CliError> {
        let d = NmfConfig::default();
        let s = &self.settings;
        let algorithm: Algorithm = s
            .pick(a.algtype.clone(), self.section, "algtype", "brunet".to_string())?
            .parse()?;
        let config = NmfConfig {
            nruns: s.pick(a.nruns, self.section, "nruns", d.nruns)?,
            max_iterations: s.pick(a.max_iterations, self.section, "max_iterations", d.max_iterations)?,
            tolerance: s.pick(a.tolerance, self.section, "tolerance", d.tolerance)?,
            master_seed: s.pick(a.seed, self.section, "seed", d.master_seed)?,
            algorithm,
        };
        config.validate()?;
        Ok(config)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(file, value)?;
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn cmd_opt_rank(ctx: &Context, a: OptRankArgs) -> Result<(), CliError> {
    let y = ctx.load_input(&a.input)?;
    let config = ctx.nmf_config(&a.nmf)?;
    log::info!("Finding optimal rank");
    let selection = opt_rank(&y, &config)?;
    log::info!("Optimal rank: {}", selection.rank);
    if let Some(path) = &a.output {
        write_json(path, &selection)?;
    }
    match ctx.output_format()? {
        OutputFormat::Json => print_json(&selection)?,
        OutputFormat::Csv => {
            println!("rank,loss,permuted_loss,decrease,permuted_decrease");
            for s in &selection.steps {
                println!("{},{},{},{},{}", s.rank, s.loss, s.permuted_loss, s.decrease, s.permuted_decrease);
            }
        }
        OutputFormat::Table => {
            println!("$rank\n[1] {}", selection.rank);
            if selection.hit_limit {
                println!("(stopping rule never fired; largest admissible rank returned)");
            }
            println!("\n{:>5} {:>14} {:>14} {:>12} {:>12}", "rank", "loss", "perm_loss", "decrease", "perm_decr");
            for s in &selection.steps {
                println!(
                    "{:>5} {:>14.6} {:>14.6} {:>12.6} {:>12.6}",
                    s.rank, s.loss, s.permuted_loss, s.decrease, s.permuted_decrease
                );
            }
        }
    }
    Ok(())
}

fn cmd_detect_cps(ctx: &Context, a: DetectArgs) -> Result<(), CliError> {
    let y = ctx.load_input(&a.input)?;
    let s = &ctx.settings;
    let sec = ctx.section;
    let d = DetectionConfig::default();
    let testtype: TestType = match s.pick_opt(a.testtype.clone(), sec, "testtype")? {
        Some(t) => t.parse()?,
        None => d.testtype,
    };
    let config = DetectionConfig {
        mindist: s.pick(a.mindist, sec, "mindist", d.mindist)?,
        nreps: s.pick(a.nreps, sec, "nreps", d.nreps)?,
        alpha: s.pick_opt(a.alpha, sec, "alpha")?,
        rank: s.pick_opt(a.rank, sec, "rank")?,
        testtype,
        require_loss_decrease: a.require_loss_decrease
            || s.get(sec, "require_loss_decrease")?.unwrap_or(d.require_loss_decrease),
        nmf: ctx.nmf_config(&a.nmf)?,
    };
    let report = detect_cps(&y, &config)?;
    if let Some(path) = &a.output {
        write_json(path, &report)?;
    }
    match ctx.output_format()? {
        OutputFormat::Json => print_json(&report)?,
        OutputFormat::Csv => {
            println!("T,stat_test,p_value,raw_p_value,delta_loss");
            for r in &report.change_points {
                println!("{},{},{},{},{}", r.t, r.stat_test, r.p_value, r.raw_p_value, r.delta_loss);
            }
        }
        OutputFormat::Table => print!("{}", report.table()),
    }
    Ok(())
}

#[derive(Serialize)]
struct ManifestEntry {
    segment: usize,
    start: usize,
    end: usize,
    rank: usize,
    lambda: Option<f64>,
    k: Option<usize>,
    edges: usize,
    file: String,
}

#[derive(Serialize)]
struct Manifest {
    input: PathBuf,
    changepoints: Vec<usize>,
    consensus_files: Vec<String>,
    adjacency: Vec<ManifestEntry>,
}

fn cmd_est_net(ctx: &Context, a: EstNetArgs) -> Result<(), CliError> {
    let y = ctx.load_input(&a.input)?;
    let s = &ctx.settings;
    let sec = ctx.section;
    let lambda: LambdaSpec = s
        .pick_opt(a.lambda.clone(), sec, "lambda")?
        .ok_or_else(|| CliError::Config("`lambda` is required (flag --lambda or setting)".into()))?
        .parse()?;
    let rank = s.pick_opt(a.rank, sec, "rank")?;
    let changepoints = if a.changepoints.is_empty() {
        s.get::<Vec<usize>>(sec, "changepoints")?.unwrap_or_default()
    } else {
        a.changepoints.clone()
    };
    let matrix_format = s.pick(a.matrix_format.clone(), sec, "matrix_format", "csv".to_string())?;
    if matrix_format != "csv" && matrix_format != "json" {
        return Err(CliError::Config(format!("matrix_format must be csv or json, got `{matrix_format}`")));
    }
    let config = ctx.nmf_config(&a.nmf)?;
    let networks = est_net(&y, &lambda, rank, &config, &changepoints)?;

    std::fs::create_dir_all(&a.out_dir)?;
    let mut entries = Vec::new();
    let mut consensus_files = Vec::new();
    for (index, net) in networks.iter().enumerate() {
        if a.consensus {
            let name = format!("segment{}_consensus.csv", index + 1);
            write_table(&a.out_dir.join(&name), net.consensus.values.view(), TableFormat::Csv, None)?;
            consensus_files.push(name);
        }
        for adj in &net.adjacency {
            let (tag, lambda, k) = match adj.mode {
                AdjacencyMode::Threshold(l) => (format!("lambda{l}"), Some(l), None),
                AdjacencyMode::Clusters(k) => (format!("k{k}"), None, Some(k)),
                AdjacencyMode::Imported => ("imported".to_string(), None, None),
            };
            let name = format!("segment{}_{tag}.{matrix_format}", index + 1);
            let path = a.out_dir.join(&name);
            if matrix_format == "csv" {
                write_binary_matrix(&path, adj.values.view())?;
            } else {
                write_json(&path, &adj.values.outer_iter().map(|r| r.to_vec()).collect::<Vec<_>>())?;
            }
            entries.push(ManifestEntry {
                segment: index + 1,
                start: net.start,
                end: net.end,
                rank: net.rank,
                lambda,
                k,
                edges: adj.edge_count(),
                file: name,
            });
        }
    }
    let manifest = Manifest {
        input: a.input.input.clone(),
        changepoints,
        consensus_files,
        adjacency: entries,
    };
    write_json(&a.out_dir.join("manifest.json"), &manifest)?;
    match ctx.output_format()? {
        OutputFormat::Json => print_json(&manifest)?,
        _ => {
            for e in &manifest.adjacency {
                println!("{}:{} rank {} -> {} ({} edges)", e.start, e.end, e.rank, e.file, e.edges);
            }
        }
    }
    Ok(())
}

fn cmd_simulate(ctx: &Context, a: SimulateArgs) -> Result<(), CliError> {
    let s = &ctx.settings;
    let sec = ctx.section;
    let d = SimulationSpec::default();
    let spec = SimulationSpec {
        p: s.pick(a.p, sec, "p", d.p)?,
        t: s.pick(a.t, sec, "t", d.t)?,
        changepoints: if a.changepoints.is_empty() {
            s.get(sec, "changepoints")?.unwrap_or_default()
        } else {
            a.changepoints.clone()
        },
        clusters: s.pick(a.clusters, sec, "clusters", d.clusters)?,
        within_corr: s.pick(a.within_corr, sec, "within_corr", d.within_corr)?,
        between_corr: s.pick(a.between_corr, sec, "between_corr", d.between_corr)?,
        reshuffle: !a.no_reshuffle && s.get(sec, "reshuffle")?.unwrap_or(d.reshuffle),
        master_seed: s.pick(a.seed, sec, "seed", d.master_seed)?,
        target_mean: s.pick(a.target_mean, sec, "target_mean", d.target_mean)?,
        min_sd: s.pick(a.min_sd, sec, "min_sd", d.min_sd)?,
    };
    let sim = simulate_dataset(&spec)?;
    let format = TableFormat::from_path(&a.output);
    let data = if a.header {
        let labels = (1..=spec.p).map(|j| format!("V{j}")).collect();
        sim.data.with_labels(labels)?
    } else {
        sim.data
    };
    save_matrix(&a.output, &data, format)?;
    let truth_path = a.truth.clone().unwrap_or_else(|| {
        let mut p = a.output.clone().into_os_string();
        p.push(".truth.json");
        PathBuf::from(p)
    });
    #[derive(Serialize)]
    struct Truth<'a> {
        spec: &'a SimulationSpec,
        changepoints: &'a [usize],
        labels: &'a [Vec<usize>],
    }
    let truth = Truth {
        spec: &spec,
        changepoints: &sim.truth.changepoints,
        labels: &sim.truth.labels,
    };
    write_json(&truth_path, &truth)?;
    match ctx.output_format()? {
        OutputFormat::Json => print_json(&truth)?,
        _ => println!(
            "wrote {}x{} series to {} and ground truth to {}",
            spec.t,
            spec.p,
            a.output.display(),
            truth_path.display()
        ),
    }
    Ok(())
}

/// Parse `1-30`, `1,5,9` or mixtures such as `1-3,7`.
fn parse_node_list(s: &str) -> Result<Vec<usize>, CliError> {
    let bad = |part: &str| CliError::Config(format!("invalid node id or range `{part}` in --nodes"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: usize = a.trim().parse().map_err(|_| bad(part))?;
                let b: usize = b.trim().parse().map_err(|_| bad(part))?;
                if a > b {
                    return Err(bad(part));
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad(part))?),
        }
    }
    Ok(out)
}

fn cmd_export_viewer(ctx: &Context, a: ExportArgs) -> Result<(), CliError> {
    let values = fabisearch::data::read_binary_matrix(&a.adjacency)?;
    let mode = match (a.lambda, a.k) {
        (Some(l), _) => AdjacencyMode::Threshold(l),
        (None, Some(k)) => AdjacencyMode::Clusters(k),
        (None, None) => AdjacencyMode::Imported,
    };
    let adjacency = AdjacencyMatrix::from_values(values, mode)?;
    let atlas = AtlasTable::load(&a.atlas)?;
    let filter = if !a.communities.is_empty() {
        Some(NodeFilter::Communities(a.communities.clone()))
    } else {
        a.nodes.as_deref().map(parse_node_list).transpose()?.map(NodeFilter::Nodes)
    };
    let colors = if a.colors.is_empty() {
        ctx.settings.get::<Vec<String>>(ctx.section, "colors")?.unwrap_or_default()
    } else {
        a.colors.clone()
    };
    let export = export_network_json(
        &a.output,
        &adjacency,
        &atlas,
        filter.as_ref(),
        Some(&colors),
        a.source.as_deref(),
        a.segment,
    )?;
    match ctx.output_format()? {
        OutputFormat::Json => print_json(&export)?,
        _ => println!(
            "exported {} nodes and {} edges to {}",
            export.nodes.len(),
            export.edges.len(),
            a.output.display()
        ),
    }
    Ok(())
}
