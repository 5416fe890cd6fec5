//! Command-line entry points. Argument parsing is a small hand-rolled
//! `--key value` scanner; every subcommand prints what it wrote.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use autodiff::rng::SplitMix64;
use dfcl::{SampleData, TaskContext, TrainMode};
use port_model::load_fixture_with_horizon;
use scheduler::{brute_force_tiny, gantt_csv, solution_to_json, solve_logistics, SearchConfig};
use soft_knn::{MemorySet, Metric};

use crate::config::BenchConfig;
use crate::dataset::{generate_synthetic, to_csv};
use crate::error::{BenchError, Result};
use crate::stream::{evaluate_forecasts, run_stream_prepared, Bench, StreamReport};

pub fn run(args: &[String]) -> Result<()> {
    let Some(cmd) = args.first() else {
        print_usage();
        return Ok(());
    };
    let flags = parse_flags(&args[1..])?;
    match cmd.as_str() {
        "gen-data" => gen_data(&flags),
        "solve" => solve(&flags),
        "train" => train(&flags),
        "stream" => stream(&flags),
        "eval" => eval_run_dir(&flags),
        "gradcheck" => gradcheck(&flags),
        "report" => report_cmd(&flags),
        "help" | "--help" | "-h" => {
            print_usage();
            Ok(())
        }
        other => Err(BenchError::Config(format!("unknown subcommand '{other}'"))),
    }
}

fn print_usage() {
    println!(
        "taskbench subcommands:
  gen-data  --seed N --days N --out FILE [--train-days N]
  solve     --task 1..6 --day N --mode exact|heuristic [--config FILE] [--out DIR]
  train     --mode MODE --task 1..6 [--config FILE] [--out DIR]
  stream    [--config FILE] [--out DIR]
  eval      --run-dir DIR [--config FILE]
  gradcheck --suite autodiff|qp|softknn|pipeline
  report    --run-dir DIR --format csv|json|plots

modes: sbl dfl-taskwise dfl-seq dfcl-freeze dfcl-ewc joint
config: key=value file; see crates/taskbench/src/config.rs for keys"
    );
}

fn parse_flags(args: &[String]) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut i = 0;
    while i < args.len() {
        let key = args[i]
            .strip_prefix("--")
            .ok_or_else(|| BenchError::Config(format!("expected --flag, got '{}'", args[i])))?;
        let value = args
            .get(i + 1)
            .ok_or_else(|| BenchError::Config(format!("flag --{key} needs a value")))?;
        out.insert(key.to_string(), value.clone());
        i += 2;
    }
    Ok(out)
}

fn get_usize(flags: &BTreeMap<String, String>, key: &str) -> Result<usize> {
    flags
        .get(key)
        .ok_or_else(|| BenchError::Config(format!("missing --{key}")))?
        .parse()
        .map_err(|_| BenchError::Config(format!("bad --{key}")))
}

fn load_config(flags: &BTreeMap<String, String>) -> Result<BenchConfig> {
    match flags.get("config") {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| BenchError::Io(format!("{path}: {e}")))?;
            BenchConfig::parse(&text)
        }
        None => Ok(BenchConfig::default()),
    }
}

fn gen_data(flags: &BTreeMap<String, String>) -> Result<()> {
    let seed: u64 = flags
        .get("seed")
        .ok_or_else(|| BenchError::Config("missing --seed".into()))?
        .parse()
        .map_err(|_| BenchError::Config("bad --seed".into()))?;
    let days = get_usize(flags, "days")?;
    let train_days = flags
        .get("train-days")
        .map(|v| v.parse().map_err(|_| BenchError::Config("bad --train-days".into())))
        .transpose()?
        .unwrap_or(days / 2);
    let out = flags.get("out").ok_or_else(|| BenchError::Config("missing --out".into()))?;
    let ds = generate_synthetic(seed, days, train_days)?;
    std::fs::write(out, to_csv(&ds)).map_err(|e| BenchError::Io(format!("{out}: {e}")))?;
    println!("wrote {} hours to {out}", ds.n_hours());
    Ok(())
}

fn solve(flags: &BTreeMap<String, String>) -> Result<()> {
    let cfg = load_config(flags)?;
    let task_id = get_usize(flags, "task")?;
    let day = get_usize(flags, "day")?;
    let mode = flags.get("mode").map(String::as_str).unwrap_or("heuristic");
    let bench_task = load_fixture_with_horizon(task_id, cfg.horizon)?;
    let ds = generate_synthetic(cfg.data_seed, cfg.train_days + cfg.test_days, cfg.train_days)?;
    if day >= ds.usable_days() {
        return Err(BenchError::Config(format!("--day must be below {}", ds.usable_days())));
    }
    let prices = ds.price_window(day, cfg.horizon);
    let load = ds.net_load_window(day, cfg.horizon);
    let solution = match mode {
        "heuristic" => {
            solve_logistics(&bench_task, &prices, &load, &SearchConfig::with_seed(cfg.sched_seed))?
                .solution
        }
        "exact" => brute_force_tiny(&bench_task, &prices, &load)?,
        other => return Err(BenchError::Config(format!("unknown solve mode '{other}'"))),
    };
    println!("objective: {:.4}", solution.objective);
    if let Some(dir) = flags.get("out") {
        let base = Path::new(dir);
        std::fs::create_dir_all(base).map_err(|e| BenchError::Io(e.to_string()))?;
        std::fs::write(base.join("solution.json"), solution_to_json(&solution))
            .map_err(|e| BenchError::Io(e.to_string()))?;
        std::fs::write(base.join("gantt.csv"), gantt_csv(&solution))
            .map_err(|e| BenchError::Io(e.to_string()))?;
        println!("wrote solution.json and gantt.csv under {dir}");
    }
    Ok(())
}

fn train(flags: &BTreeMap<String, String>) -> Result<()> {
    let mut cfg = load_config(flags)?;
    let task_id = get_usize(flags, "task")?;
    let mode_name =
        flags.get("mode").ok_or_else(|| BenchError::Config("missing --mode".into()))?;
    let mode = TrainMode::parse(mode_name)
        .ok_or_else(|| BenchError::Config(format!("unknown mode '{mode_name}'")))?;
    cfg.tasks = vec![task_id];
    cfg.modes = vec![mode];
    cfg.seeds = vec![cfg.seeds.first().copied().unwrap_or(1)];
    let bench = Bench::prepare(cfg)?;
    let out_dir = flags.get("out").map(PathBuf::from);
    let report = run_stream_prepared(&bench, out_dir.as_deref())?;
    for s in &report.summaries {
        println!(
            "mode {} seed {} regret {:.2} rr {:.2}% mae(load) {:.3} mae(price) {:.3}",
            s.mode, s.seed, s.avg_regret, s.rr_percent, s.avg_mae_load, s.avg_mae_price
        );
    }
    Ok(())
}

fn stream(flags: &BTreeMap<String, String>) -> Result<()> {
    let cfg = load_config(flags)?;
    let out = flags.get("out").map(PathBuf::from).unwrap_or_else(|| cfg.out_dir.clone());
    let bench = Bench::prepare(cfg)?;
    std::fs::create_dir_all(&out).map_err(|e| BenchError::Io(e.to_string()))?;
    std::fs::write(out.join("config.txt"), config_echo(&bench.cfg))
        .map_err(|e| BenchError::Io(e.to_string()))?;
    let report = run_stream_prepared(&bench, Some(&out))?;
    println!("{}", crate::report::summaries_csv(&report));
    println!("report written under {}", out.display());
    Ok(())
}

fn eval_run_dir(flags: &BTreeMap<String, String>) -> Result<()> {
    let run_dir =
        PathBuf::from(flags.get("run-dir").ok_or_else(|| BenchError::Config("missing --run-dir".into()))?);
    let cfg = match flags.get("config") {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| BenchError::Io(format!("{path}: {e}")))?;
            BenchConfig::parse(&text)?
        }
        None => {
            let text = std::fs::read_to_string(run_dir.join("config.txt"))
                .map_err(|e| BenchError::Io(format!("config.txt: {e}")))?;
            BenchConfig::parse(&text)?
        }
    };
    let bench = Bench::prepare(cfg)?;
    let mut report = StreamReport::default();
    // Recompute regret for every stored forecast file.
    for &seed in &bench.cfg.seeds {
        for &mode in &bench.cfg.modes {
            for k in 0..bench.tasks.len() {
                for j in 0..=k {
                    let path = run_dir
                        .join(mode.name())
                        .join(format!("seed{seed}"))
                        .join(format!("checkpoint{k}"))
                        .join(format!("forecasts_task{j}.json"));
                    if !path.exists() {
                        continue;
                    }
                    let forecasts = crate::report::read_forecasts(&path)?;
                    let out = evaluate_forecasts(
                        &bench.tasks[j].task,
                        &bench.tasks[j].test_samples,
                        &forecasts,
                        &bench.pf_eval[j],
                        &SearchConfig::fast(bench.cfg.sched_seed),
                    )?;
                    report.records.push(crate::stream::EvalRecord {
                        mode: mode.name().into(),
                        seed,
                        checkpoint: k,
                        task_index: j,
                        task_id: bench.tasks[j].task.id.clone(),
                        mae_load: out.mae_load,
                        mae_price: out.mae_price,
                        mean_regret: out.mean_regret,
                        mean_cost: out.mean_cost,
                        n_days: out.n_days,
                    });
                }
            }
        }
    }
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| BenchError::Io(format!("serialize: {e}")))?;
    let out_path = run_dir.join("report_recomputed.json");
    std::fs::write(&out_path, json).map_err(|e| BenchError::Io(e.to_string()))?;
    println!("recomputed {} evaluation rows -> {}", report.records.len(), out_path.display());
    Ok(())
}

fn report_cmd(flags: &BTreeMap<String, String>) -> Result<()> {
    let run_dir =
        PathBuf::from(flags.get("run-dir").ok_or_else(|| BenchError::Config("missing --run-dir".into()))?);
    let format = flags.get("format").map(String::as_str).unwrap_or("csv");
    let text = std::fs::read_to_string(run_dir.join("report.json"))
        .map_err(|e| BenchError::Io(format!("report.json: {e}")))?;
    let report: StreamReport =
        serde_json::from_str(&text).map_err(|e| BenchError::Io(format!("report parse: {e}")))?;
    match format {
        "csv" => {
            println!("{}", crate::report::summaries_csv(&report));
        }
        "json" => println!("{text}"),
        "plots" => {
            crate::report::write_report(&run_dir, &report)?;
            println!(
                "wrote regret_trajectories.svg and training_time.svg under {}",
                run_dir.display()
            );
        }
        other => return Err(BenchError::Config(format!("unknown format '{other}'"))),
    }
    Ok(())
}

fn config_echo(cfg: &BenchConfig) -> String {
    let tasks: Vec<String> = cfg.tasks.iter().map(|t| t.to_string()).collect();
    let modes: Vec<&str> = cfg.modes.iter().map(|m| m.name()).collect();
    let seeds: Vec<String> = cfg.seeds.iter().map(|s| s.to_string()).collect();
    format!(
        "tasks={}\nmodes={}\nseeds={}\ntrain_days={}\ntest_days={}\neval_days={}\ndata_seed={}\nhorizon={}\nlr={}\nbatch_size={}\npretrain_epochs={}\nepochs={}\nsamples_per_epoch={}\ndfl_pool={}\nearly_stop_patience={}\newc_scale={}\nfisher_samples={}\nmemory_truth={}\nmemory_noisy={}\nmemory_noise_frac={}\nmemory_cap={}\nsched_seed={}\ntransfer_eval={}\n",
        tasks.join(","),
        modes.join(","),
        seeds.join(","),
        cfg.train_days,
        cfg.test_days,
        cfg.eval_days,
        cfg.data_seed,
        cfg.horizon,
        cfg.hyper.lr,
        cfg.hyper.batch_size,
        cfg.hyper.pretrain_epochs,
        cfg.hyper.epochs,
        cfg.hyper.samples_per_epoch,
        cfg.hyper.dfl_pool,
        cfg.hyper.early_stop_patience,
        cfg.hyper.ewc_scale,
        cfg.hyper.fisher_samples,
        cfg.memory_truth,
        cfg.memory_noisy,
        cfg.memory_noise_frac,
        cfg.memory_cap,
        cfg.sched_seed,
        cfg.transfer_eval,
    )
}

fn gradcheck(flags: &BTreeMap<String, String>) -> Result<()> {
    let suite = flags.get("suite").map(String::as_str).unwrap_or("autodiff");
    let ok = match suite {
        "autodiff" => gradcheck_autodiff(),
        "qp" => gradcheck_qp(),
        "softknn" => gradcheck_softknn(),
        "pipeline" => gradcheck_pipeline()?,
        other => return Err(BenchError::Config(format!("unknown suite '{other}'"))),
    };
    if ok {
        println!("gradcheck {suite}: PASS");
        Ok(())
    } else {
        Err(BenchError::Metric(format!("gradcheck {suite} failed")))
    }
}

fn gradcheck_autodiff() -> bool {
    use autodiff::{Graph, Tensor};
    let mut rng = SplitMix64::new(101);
    let mut worst: f64 = 0.0;
    for _ in 0..40 {
        let n = 6;
        let x0: Vec<f64> = (0..n).map(|_| rng.uniform(-1.5, 1.5)).collect();
        let eval = |xs: &[f64], grad: bool| -> (f64, Option<Vec<f64>>) {
            let mut g = Graph::new();
            let x = g.param("x", Tensor::vector(xs.to_vec()));
            let t = g.tanh(x);
            let sm = g.softmax(t);
            let e = g.exp(x);
            let m = g.mul(sm, e);
            let loss = g.sum(m);
            g.mark_output("loss", loss);
            g.forward(&BTreeMap::new()).unwrap();
            let v = g.output_value(loss).unwrap().value();
            if grad {
                let gr = g.backward(loss, 1.0).unwrap();
                (v, Some(gr["x"].data().to_vec()))
            } else {
                (v, None)
            }
        };
        let (_, ad) = eval(&x0, true);
        let fd = autodiff::fd::central_gradient(&mut |xs| eval(xs, false).0, &x0, 1e-5);
        worst = worst.max(autodiff::fd::max_entry_rel_error(ad.as_ref().unwrap(), &fd, 1e-4));
    }
    println!("autodiff: worst relative error {worst:.3e} over 40 random graphs");
    worst < 1e-4
}

fn gradcheck_qp() -> bool {
    use qp_layer::testgen::{random_parameterized_lp, strict_complementarity_margin};
    let mut rng = SplitMix64::new(4242);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    let mut attempts = 0;
    while checked < 50 && attempts < 250 {
        attempts += 1;
        let prog = random_parameterized_lp(&mut rng, attempts % 3 == 0);
        let Ok(pt) = qp_layer::solve(&prog, 1e-6) else { continue };
        if strict_complementarity_margin(&prog, &pt) < 1e-2 {
            continue;
        }
        let g: Vec<f64> = (0..prog.n).map(|i| 0.4 + 0.2 * i as f64).collect();
        let ad = qp_layer::differentiate(&prog, &pt, &g).unwrap();
        let mut fd = vec![0.0; prog.param_dim];
        for k in 0..prog.param_dim {
            let mut delta = vec![0.0; prog.param_dim];
            let h = 1e-4;
            delta[k] = h;
            let mut up = prog.clone();
            up.apply_param_delta(&delta);
            delta[k] = -h;
            let mut dn = prog.clone();
            dn.apply_param_delta(&delta);
            let xu = qp_layer::solve(&up, 1e-6).unwrap().x;
            let xd = qp_layer::solve(&dn, 1e-6).unwrap().x;
            let lu: f64 = g.iter().zip(&xu).map(|(a, b)| a * b).sum();
            let ld: f64 = g.iter().zip(&xd).map(|(a, b)| a * b).sum();
            fd[k] = (lu - ld) / (2.0 * h);
        }
        // Mixed tolerance: programs whose optimum barely moves have
        // near-zero gradients where relative error is undefined; the
        // absolute floor is the finite-difference noise (solver tol / h).
        let diff: f64 =
            ad.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let norm: f64 = fd.iter().map(|b| b * b).sum::<f64>().sqrt();
        worst = worst.max(diff / (1e-5 + 1e-3 * norm));
        checked += 1;
    }
    println!("qp: worst mixed-tolerance ratio {worst:.3e} over {checked} programs");
    checked >= 50 && worst < 1.0
}

fn gradcheck_softknn() -> bool {
    let mut rng = SplitMix64::new(77);
    let mut worst: f64 = 0.0;
    let mut sum_dev: f64 = 0.0;
    for _ in 0..50 {
        let n = 4 + rng.below(30);
        let k = 1 + rng.below(n - 1);
        let mut x: Vec<f64> = (0..n).map(|i| -2.0 + 0.17 * i as f64).collect();
        rng.shuffle(&mut x);
        let r = soft_knn::soft_topk(&x, k).unwrap();
        sum_dev = sum_dev.max((r.weights.iter().sum::<f64>() - k as f64).abs());
        let cot: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let ad = soft_knn::soft_topk_backward(&x, &r, &cot);
        let fd = autodiff::fd::central_gradient(
            &mut |xs: &[f64]| {
                let rr = soft_knn::soft_topk(xs, k).unwrap();
                rr.weights.iter().zip(&cot).map(|(w, c)| w * c).sum()
            },
            &x,
            1e-6,
        );
        worst = worst.max(autodiff::fd::rel_error(&ad, &fd, 1e-8));
    }
    println!("softknn: worst backward error {worst:.3e}, worst mask-sum deviation {sum_dev:.3e}");
    worst < 1e-5 && sum_dev < 1e-9
}

fn gradcheck_pipeline() -> Result<bool> {
    // Tiny end-to-end check mirroring the acceptance pipeline criterion.
    let task = {
        let mut sp = port_model::StaticParams::jurong_like(8);
        sp.n_cranes = 3;
        sp.berth_length = 10.0;
        sp.ess.p_max = 1.0;
        sp.ess.e_max = 3.0;
        sp.ess.e_init = 1.5;
        port_model::Task::new(
            "gradcheck",
            sp,
            vec![port_model::VesselSpec {
                arrival_time: 1,
                max_leave_time: 6,
                cargo_volume: 280.0,
                min_qc: 1,
                max_qc: 2,
                base_power: 1.5,
                charge_demand: 2.0,
                charge_max: 1.0,
                length: 5.0,
                max_wait: 3,
            }],
            "gradcheck",
        )?
    };
    let mut rng = SplitMix64::new(515);
    let day = |rng: &mut SplitMix64| -> (Vec<f64>, Vec<f64>) {
        let prices: Vec<f64> =
            (0..8).map(|t| 4.0 + 3.0 * ((t as f64) * 0.8).sin().abs() + rng.next_f64()).collect();
        let load: Vec<f64> =
            (0..8).map(|t| 1.0 + 0.5 * ((t as f64) * 0.5).cos() + 0.3 * rng.next_f64()).collect();
        (prices, load)
    };
    let samples: Vec<(Vec<f64>, Vec<f64>)> = (0..6)
        .map(|_| {
            let (p, l) = day(&mut rng);
            (l, p)
        })
        .collect();
    let entries = build_memory_set(&task, &samples, &SearchConfig::with_seed(3))?;
    let mut mem = MemorySet::new(16, 8, 8, Metric::Cosine, 3);
    for e in &entries {
        mem.push(&e.features, &e.label_qc, &e.label_berthing)?;
    }
    mem.refresh_stats();
    let ctx = TaskContext::new(task, Arc::new(mem), 1);

    let mut pair = dfcl::ModelPair {
        price: forecaster::ForecastModel::init(forecaster::ModelConfig::tiny(8, 5), 5),
        load: forecaster::ForecastModel::init(forecaster::ModelConfig::tiny(8, 5), 6),
    };
    let (prices, load) = day(&mut rng);
    let sample = SampleData {
        ctx_price: (0..5).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        ctx_load: (0..5).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        prices,
        net_load: load,
    };
    let lad = [1e-6, 1e-4];
    let pf = dfcl::training_pf_cost(&ctx, &sample.prices, &sample.net_load, &lad)?;
    let mut pg = dfcl::build_pipeline_graph(&ctx, &pair.price, &pair.load, &sample, &lad, pf)?;
    pg.graph.forward(&BTreeMap::new()).map_err(dfcl::DfclError::from)?;
    let grads = pg.graph.backward(pg.loss, 1.0).map_err(dfcl::DfclError::from)?;
    let flat = pair.flat_gradient(&grads);

    let theta0 = pair.flatten();
    let mut ad_sel = Vec::new();
    let mut fd_sel = Vec::new();
    let mut idx_rng = SplitMix64::new(999);
    for _ in 0..20 {
        let i = idx_rng.below(theta0.len());
        let h = 1e-4;
        let mut up = theta0.clone();
        up[i] += h;
        let mut dn = theta0.clone();
        dn[i] -= h;
        pair.unflatten(&up)?;
        let fp = pair.price.predict(&sample.ctx_price, &ctx.vessel_mat)?;
        let fl = pair.load.predict(&sample.ctx_load, &ctx.vessel_mat)?;
        let ru = dfcl::training_regret(&ctx, &fp, &fl, &sample.prices, &sample.net_load, &lad, pf)?;
        pair.unflatten(&dn)?;
        let fp = pair.price.predict(&sample.ctx_price, &ctx.vessel_mat)?;
        let fl = pair.load.predict(&sample.ctx_load, &ctx.vessel_mat)?;
        let rd = dfcl::training_regret(&ctx, &fp, &fl, &sample.prices, &sample.net_load, &lad, pf)?;
        ad_sel.push(flat[i]);
        fd_sel.push((ru - rd) / (2.0 * h));
    }
    let err = autodiff::fd::rel_error(&ad_sel, &fd_sel, 1e-3);
    println!("pipeline: norm-relative error {err:.3e} over 20 parameters");
    Ok(err <= 1e-2)
}

use scheduler::build_memory_set;
