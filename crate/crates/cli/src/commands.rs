use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};
use structdiv::clustering::{bregman_kmeans, KMeansConfig};
use structdiv::experiments::{
    load_rutor, run_planted_experiment, run_runtime_experiment, run_rutor_analysis, PlantedConfig, PlantedLayout,
    RuntimeConfig, Sampler,
};
use structdiv::info::{all_pairs_jbd_fast, all_pairs_jbd_naive, entropy};
use structdiv::io::{
    read_distributions_csv, read_hierarchy, read_matrix, read_square_csv, write_distributions_csv, write_square_csv,
    DistributionTable, MatrixKind, TypedMatrix,
};
use structdiv::ot::{all_pairs_wasserstein, wasserstein1};
use structdiv::similarity::{
    calibrate_tau, nearest_pd_similarity, similarity_from_hierarchy, similarity_from_metric,
    similarity_linear_from_metric, DistanceMatrix, NearestPdParams,
};
use structdiv::simplex::{floor_to_interior, Distribution};
use structdiv::{Error, Execution, Geometry, OrderParameter, Result, SimilarityMatrix, WeightedEnsemble};

use crate::manifest::ManifestBuilder;
use crate::{Cli, Command, ExpCommand, Format, GlobalOpts, JbdMethod, SamplerArg, SimMethod, StructureOpts};

/// What a subcommand produced.
enum Output {
    /// Plain values: bare JSON on standard output, wrapped with the manifest in files.
    Values(Value),
    /// Reports always carry the manifest.
    Report(Value),
    Matrix {
        labels: Vec<String>,
        values: DMatrix<f64>,
    },
}

struct Ctx {
    global: GlobalOpts,
    exec: Execution,
    seed: u64,
    seed_from_entropy: bool,
    threads: usize,
}

pub fn dispatch(cli: Cli) -> Result<()> {
    let forced_serial = matches!(cli.command, Command::Exp(ExpCommand::Runtime { .. }));
    let threads = if forced_serial { 1 } else { cli.global.threads.unwrap_or_else(rayon::current_num_threads) };
    if threads == 0 {
        return Err(Error::InvalidConfig("--threads must be at least 1".into()));
    }
    // A second initialization only fails if a pool already exists.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    let (seed, seed_from_entropy) = match cli.global.seed {
        Some(s) => (s, false),
        None => (rand::random(), true),
    };
    let exec = if threads == 1 { Execution::Serial } else { Execution::Parallel };
    let ctx = Ctx { global: cli.global, exec, seed, seed_from_entropy, threads };
    run(&ctx, cli.command)
}

fn builder(ctx: &Ctx, name: &str, params: impl Serialize) -> ManifestBuilder {
    let params = serde_json::to_value(params).unwrap_or(Value::Null);
    ManifestBuilder::new(name, params, ctx.seed, ctx.seed_from_entropy, ctx.threads)
}

fn load_dists(
    mb: &mut ManifestBuilder,
    path: &Path,
    weights: Option<&str>,
    floor: Option<f64>,
) -> Result<DistributionTable> {
    let bytes = mb.read_input(path)?;
    let mut table = read_distributions_csv(bytes.as_slice(), weights)?;
    if let Some(eps) = floor {
        table.distributions = table.distributions.iter().map(|p| floor_to_interior(p, eps)).collect::<Result<_>>()?;
    }
    Ok(table)
}

fn load_sim(mb: &mut ManifestBuilder, source: &str, elements: &[String]) -> Result<SimilarityMatrix> {
    if source == "identity" {
        return Ok(SimilarityMatrix::identity(elements.len()));
    }
    let bytes = mb.read_input(Path::new(source))?;
    let TypedMatrix::Similarity { labels, matrix } = read_matrix(bytes.as_slice(), MatrixKind::Similarity)? else {
        unreachable!()
    };
    check_labels(&labels, elements)?;
    Ok(matrix)
}

fn load_metric(mb: &mut ManifestBuilder, path: &Path) -> Result<(Vec<String>, DistanceMatrix)> {
    let bytes = mb.read_input(path)?;
    let TypedMatrix::Distance { labels, matrix } = read_matrix(bytes.as_slice(), MatrixKind::Distance)? else {
        unreachable!()
    };
    Ok((labels, matrix))
}

fn check_labels(matrix: &[String], dists: &[String]) -> Result<()> {
    if matrix.len() != dists.len() {
        return Err(Error::DimensionMismatch { expected: dists.len(), got: matrix.len() });
    }
    if let Some(i) = (0..matrix.len()).find(|&i| matrix[i] != dists[i]) {
        return Err(Error::Parse(format!(
            "matrix id {:?} at position {i} does not match distribution header id {:?}",
            matrix[i], dists[i]
        )));
    }
    Ok(())
}

fn scalar_or_list(v: Vec<f64>) -> Value {
    if v.len() == 1 {
        json!(v[0])
    } else {
        json!(v)
    }
}

fn row_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("d{i}")).collect()
}

/// `<out>` with its extension replaced by `suffix`.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn write_file(path: &Path, data: &[u8]) -> Result<()> {
    fs::write(path, data).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn values_csv(v: &Value) -> Result<String> {
    let items: Vec<f64> = match v {
        Value::Number(n) => vec![n.as_f64().unwrap_or(f64::NAN)],
        Value::Array(a) => a.iter().map(|x| x.as_f64()).collect::<Option<_>>().ok_or_else(csv_unavailable)?,
        _ => return Err(csv_unavailable()),
    };
    let mut s = String::from("index,value\n");
    for (i, x) in items.iter().enumerate() {
        s.push_str(&format!("{i},{}\n", structdiv::io::format_f64(*x)));
    }
    Ok(s)
}

fn csv_unavailable() -> Error {
    Error::InvalidConfig("this result has no CSV form; use --format json".into())
}

fn matrix_json(labels: &[String], values: &DMatrix<f64>) -> Value {
    let rows: Vec<Vec<f64>> = (0..values.nrows()).map(|i| values.row(i).iter().copied().collect()).collect();
    json!({ "labels": labels, "values": rows })
}

fn matrix_csv(labels: &[String], values: &DMatrix<f64>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_square_csv(&mut buf, labels, values)?;
    Ok(buf)
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).unwrap_or_default()
}

fn emit(ctx: &Ctx, mut mb: ManifestBuilder, out: Output) -> Result<()> {
    let format = ctx.global.format;
    match &ctx.global.out {
        None => {
            let text = match out {
                Output::Values(v) if format == Some(Format::Csv) => values_csv(&v)?,
                Output::Values(v) => format!("{v}\n"),
                Output::Report(_) if format == Some(Format::Csv) => return Err(csv_unavailable()),
                Output::Report(v) => pretty(&json!({ "manifest": mb.finish(), "result": v })) + "\n",
                Output::Matrix { labels, values } if format == Some(Format::Json) => {
                    format!("{}\n", matrix_json(&labels, &values))
                }
                Output::Matrix { labels, values } => {
                    String::from_utf8(matrix_csv(&labels, &values)?).unwrap_or_default()
                }
            };
            print!("{text}");
        }
        Some(path) => {
            mb.add_output(path);
            let csv_form = match (&out, format) {
                (Output::Values(v), Some(Format::Csv)) => Some(values_csv(v)?.into_bytes()),
                (Output::Report(_), Some(Format::Csv)) => return Err(csv_unavailable()),
                (Output::Matrix { labels, values }, None | Some(Format::Csv)) => Some(matrix_csv(labels, values)?),
                _ => None,
            };
            match csv_form {
                Some(bytes) => {
                    let side = sibling(path, "manifest.json");
                    mb.add_output(&side);
                    write_file(path, &bytes)?;
                    write_file(&side, pretty(&json!(mb.finish())).as_bytes())?;
                }
                None => {
                    let result = match out {
                        Output::Values(v) | Output::Report(v) => v,
                        Output::Matrix { labels, values } => matrix_json(&labels, &values),
                    };
                    write_file(path, pretty(&json!({ "manifest": mb.finish(), "result": result })).as_bytes())?;
                }
            }
        }
    }
    Ok(())
}

fn geometry_inputs(
    mb: &mut ManifestBuilder,
    s: &StructureOpts,
    dist: &Path,
    weights: Option<&str>,
) -> Result<(DistributionTable, SimilarityMatrix, OrderParameter)> {
    let table = load_dists(mb, dist, weights, s.floor)?;
    let z = load_sim(mb, &s.sim, &table.elements)?;
    Ok((table, z, OrderParameter::new(s.alpha)?))
}

fn run(ctx: &Ctx, command: Command) -> Result<()> {
    match command {
        Command::Entropy { structure, dist } => {
            let mut mb = builder(ctx, "entropy", &structure);
            let (t, z, alpha) = geometry_inputs(&mut mb, &structure, &dist, None)?;
            let h = t.distributions.iter().map(|p| entropy(&z, alpha, p)).collect::<Result<Vec<_>>>()?;
            emit(ctx, mb, Output::Values(scalar_or_list(h)))
        }
        Command::Divergence { structure, p, q } => {
            let mut mb = builder(ctx, "divergence", &structure);
            let (tp, z, alpha) = geometry_inputs(&mut mb, &structure, &p, None)?;
            let tq = load_dists(&mut mb, &q, None, structure.floor)?;
            check_labels(&tq.elements, &tp.elements)?;
            let (np, nq) = (tp.distributions.len(), tq.distributions.len());
            if np != nq && np != 1 && nq != 1 {
                return Err(Error::DimensionMismatch { expected: np, got: nq });
            }
            let z = z.certified()?;
            let geom = Geometry::new(&z, alpha)?;
            let d = (0..np.max(nq))
                .map(|i| geom.divergence(&tp.distributions[i.min(np - 1)], &tq.distributions[i.min(nq - 1)]))
                .collect::<Result<Vec<_>>>()?;
            emit(ctx, mb, Output::Values(scalar_or_list(d)))
        }
        Command::JbdMatrix { structure, dist, method } => {
            let mut mb = builder(ctx, "jbd-matrix", json!({ "structure": &structure, "method": method }));
            let (t, z, alpha) = geometry_inputs(&mut mb, &structure, &dist, None)?;
            let z = z.certified()?;
            let m = match method {
                JbdMethod::Fast => all_pairs_jbd_fast(&z, alpha, &t.distributions, ctx.exec)?,
                JbdMethod::Naive => all_pairs_jbd_naive(&z, alpha, &t.distributions, ctx.exec)?,
            };
            emit(ctx, mb, Output::Matrix { labels: row_labels(m.len()), values: m.values })
        }
        Command::Cluster { structure, dist, k, restarts, max_iters, weights_column, centroids } => {
            let params = json!({ "structure": &structure, "k": k, "restarts": restarts, "max_iters": max_iters,
                "weights_column": &weights_column });
            let mut mb = builder(ctx, "cluster", params);
            let (t, z, alpha) = geometry_inputs(&mut mb, &structure, &dist, weights_column.as_deref())?;
            let z = z.certified()?;
            let geom = Geometry::new(&z, alpha)?;
            let ensemble = match &t.weights {
                Some(w) => WeightedEnsemble::with_raw_weights(t.distributions.clone(), w)?,
                None => WeightedEnsemble::uniform(t.distributions.clone())?,
            };
            let cfg = KMeansConfig { k, n_restarts: restarts, max_iters, seed: ctx.seed, exec: ctx.exec };
            let report = bregman_kmeans(&geom, &ensemble, cfg)?;
            let centroid_path = centroids.or_else(|| ctx.global.out.as_ref().map(|o| sibling(o, "centroids.csv")));
            if let Some(path) = &centroid_path {
                let mut buf = Vec::new();
                write_distributions_csv(&mut buf, &t.elements, report.centroids())?;
                write_file(path, &buf)?;
                mb.add_output(path);
            }
            let inline: Option<Vec<&[f64]>> =
                centroid_path.is_none().then(|| report.centroids().iter().map(Distribution::as_slice).collect());
            let d = &report.decomposition;
            let result = json!({
                "assignments": report.best.assignments,
                "k": k,
                "explained_fraction": report.best.explained_fraction,
                "total_information": d.total,
                "between": d.between,
                "within": d.within,
                "clusters": d.clusters,
                "best_restart": report.best_restart,
                "restart_explained_fractions": report.restart_objectives(),
                "degenerate": report.degenerate,
                "centroids_path": centroid_path,
                "centroids": inline,
            });
            emit(ctx, mb, Output::Report(result))
        }
        Command::Wasserstein { metric, dist } => {
            let mut mb = builder(ctx, "wasserstein", json!({}));
            let (labels, d) = load_metric(&mut mb, &metric)?;
            let t = load_dists(&mut mb, &dist, None, None)?;
            check_labels(&labels, &t.elements)?;
            match t.distributions.len() {
                0 | 1 => Err(Error::Empty("need at least two distributions")),
                2 => {
                    let (w, _) = wasserstein1(&d, &t.distributions[0], &t.distributions[1])?;
                    emit(ctx, mb, Output::Values(json!(w)))
                }
                n => {
                    let m = all_pairs_wasserstein(&d, &t.distributions, ctx.exec)?;
                    emit(ctx, mb, Output::Matrix { labels: row_labels(n), values: m.values })
                }
            }
        }
        Command::SimFromDist { input, method, tau, median_similarity } => {
            let mut mb = builder(
                ctx,
                "sim-from-dist",
                json!({ "method": method, "tau": tau,
                "median_similarity": median_similarity }),
            );
            let (labels, d) = load_metric(&mut mb, &input)?;
            let z = match method {
                SimMethod::Exp => {
                    let tau = match (tau, median_similarity) {
                        (Some(t), _) => t,
                        (None, Some(s)) => calibrate_tau(&d, s)?,
                        (None, None) => 1.0,
                    };
                    mb.set_param("resolved_tau", json!(tau));
                    similarity_from_metric(&d, tau)?
                }
                SimMethod::Linear => similarity_linear_from_metric(&d)?,
            };
            let z = z.certified()?;
            emit(ctx, mb, Output::Matrix { labels, values: z.to_dense() })
        }
        Command::SimFromHierarchy { paths, levels } => {
            let mut mb = builder(ctx, "sim-from-hierarchy", json!({}));
            let csv = mb.read_input(&paths)?;
            let json = String::from_utf8(mb.read_input(&levels)?).map_err(|e| Error::Parse(e.to_string()))?;
            let (labels, h) = read_hierarchy(csv.as_slice(), &json)?;
            let z = similarity_from_hierarchy(&h)?.certified()?;
            emit(ctx, mb, Output::Matrix { labels, values: z.to_dense() })
        }
        Command::NearestPd { input, delta, cap, tol, max_iters } => {
            let params = NearestPdParams { delta, offdiag_cap: cap, max_iters, tol };
            let mut mb =
                builder(ctx, "nearest-pd", json!({ "delta": delta, "cap": cap, "tol": tol, "max_iters": max_iters }));
            let bytes = mb.read_input(&input)?;
            let m = read_square_csv(bytes.as_slice())?;
            let r = nearest_pd_similarity(&m.values, params)?;
            mb.set_param("iterations", json!(r.iterations));
            mb.set_param("min_eigenvalue", json!(r.min_eigenvalue));
            emit(ctx, mb, Output::Matrix { labels: m.labels, values: r.matrix.to_dense() })?;
            if r.converged {
                Ok(())
            } else {
                Err(Error::NotConverged { iterations: r.iterations })
            }
        }
        Command::Exp(exp) => run_exp(ctx, exp),
    }
}

fn run_exp(ctx: &Ctx, exp: ExpCommand) -> Result<()> {
    match exp {
        ExpCommand::Planted { m_values, runs, restarts, layout } => {
            let mut mb =
                builder(ctx, "exp planted", json!({ "m_values": &m_values, "runs": runs, "restarts": restarts }));
            let layout = match &layout {
                Some(p) => {
                    let bytes = mb.read_input(p)?;
                    PlantedLayout::from_json(&String::from_utf8_lossy(&bytes))?
                }
                None => PlantedLayout::default(),
            };
            let cfg = PlantedConfig {
                layout,
                m_values,
                runs,
                restarts,
                seed: ctx.seed,
                exec: ctx.exec,
                ..Default::default()
            };
            let with_z = run_planted_experiment(&cfg, true)?;
            let with_i = run_planted_experiment(&cfg, false)?;
            if let Some(out) = &ctx.global.out {
                for (tag, r) in [("z", &with_z), ("identity", &with_i)] {
                    let path = sibling(out, &format!("{tag}.curves.csv"));
                    write_file(&path, r.curves_csv().as_bytes())?;
                    mb.add_output(&path);
                }
            }
            emit(ctx, mb, Output::Report(json!({ "structure": with_z, "identity": with_i })))
        }
        ExpCommand::Runtime { sizes, runs, alpha, sampler } => {
            let sampler = match sampler {
                SamplerArg::FlatDirichlet => Sampler::FlatDirichlet,
                SamplerArg::NormalizedUniform => Sampler::NormalizedUniform,
            };
            let cfg = RuntimeConfig { sizes, runs, alpha, sampler, seed: ctx.seed, ..Default::default() };
            let mut mb = builder(ctx, "exp runtime", &cfg);
            let report = run_runtime_experiment(&cfg)?;
            if let Some(out) = &ctx.global.out {
                let path = sibling(out, "timings.csv");
                write_file(&path, report.timings_csv().as_bytes())?;
                mb.add_output(&path);
            }
            emit(ctx, mb, Output::Report(json!(report)))
        }
        ExpCommand::BetaDiv { data, alpha, n_null } => {
            let dir = data.unwrap_or_else(|| PathBuf::from(structdiv::experiments::beta::DEFAULT_DATA_DIR));
            let mut mb = builder(ctx, "exp beta-div", json!({ "data": &dir, "alpha": alpha, "n_null": n_null }));
            for f in ["abundance.csv", "stages.csv", "traits.csv"] {
                mb.read_input(&dir.join(f))?;
            }
            let data = load_rutor(&dir)?;
            let report = run_rutor_analysis(&data, alpha, n_null, ctx.seed, ctx.exec)?;
            if let Some(out) = &ctx.global.out {
                let mut csv = String::from("measure,stage,sample,value\n");
                for (measure, b) in [("taxonomic", &report.taxonomic), ("functional", &report.functional)] {
                    for s in &b.stages {
                        for (j, v) in s.null.iter().enumerate() {
                            csv.push_str(&format!("{measure},{},{j},{}\n", s.stage, structdiv::io::format_f64(*v)));
                        }
                    }
                }
                let path = sibling(out, "null.csv");
                write_file(&path, csv.as_bytes())?;
                mb.add_output(&path);
            }
            emit(ctx, mb, Output::Report(json!(report)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use structdiv::io::default_labels;

    #[test]
    fn sibling_paths() {
        assert_eq!(sibling(Path::new("/a/r.json"), "centroids.csv"), PathBuf::from("/a/r.centroids.csv"));
        assert_eq!(sibling(Path::new("out"), "manifest.json"), PathBuf::from("out.manifest.json"));
    }

    #[test]
    fn values_to_csv() {
        assert_eq!(values_csv(&json!(0.5)).unwrap(), "index,value\n0,5.0000000000000000e-1\n");
        assert!(values_csv(&json!({"a": 1})).is_err());
    }

    #[test]
    fn label_check() {
        let a = vec!["x".to_string(), "y".to_string()];
        assert!(check_labels(&a, &a).is_ok());
        assert!(check_labels(&a, &default_labels(2)).is_err());
    }
}
