//! Acceptance suite: every gate criterion as one test printing one
//! PASS line (run with `--nocapture` to see them live).
//!
//! Heavy artifacts (the desk zoo, the SSL runs) are built once and
//! cached under `target/acceptance_cache`, so a warm re-run is cheap.

use std::path::PathBuf;
use std::sync::OnceLock;

use encoders::{Encoder, EncoderArch, EncoderKind, ParamIds};
use formal_lang::{
    encoding, AllowedNext, DatasetLanguageSpec, GeneralLanguageSpec, LanguageSpec,
};
use interrogator::{
    build_identification_tree, identify_by_single_probe, identify_interactive_tree,
    identify_language_interactive, identify_noninteractive, language_family,
    noninteractive_language_probe_set, NoninteractiveProbeSet,
};
use numkit::{grad_check_multi, grad_check_sampled, RngStream, Tape, Tensor};
use rnn_core::{
    apply_permutation, corrupt_permutation, lstm_forward, LstmDims, LstmWeights,
    PermutationSpec, ALL_GROUPS,
};
use ssl::{evaluate_emulation, pearson, SslConfig};
use zoo::{build_zoo, load_zoo, LoadedZoo, Split, ZooConfig};

const ACCEPT_SEED: u64 = 7;
const SSL_SEEDS: [u64; 3] = [1, 2, 3];

fn cache_root() -> PathBuf {
    let target = std::env::var("CARGO_TARGET_DIR").map(PathBuf::from).unwrap_or_else(|_| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR"))
            .join("..")
            .join("..")
            .join("target")
    });
    let dir = target.join("acceptance_cache");
    std::fs::create_dir_all(&dir).expect("cache dir");
    dir
}

fn desk_zoo() -> &'static LoadedZoo {
    static ZOO: OnceLock<LoadedZoo> = OnceLock::new();
    ZOO.get_or_init(|| {
        let dir = cache_root().join(format!("zoo-desk-{ACCEPT_SEED}"));
        std::fs::create_dir_all(&dir).expect("zoo dir");
        let config = ZooConfig::desk(ACCEPT_SEED);
        // `build_zoo` resumes from an intact manifest, so a cached build
        // is verified and reused rather than retrained.
        build_zoo(&config, &dir, 2).expect("desk zoo build");
        load_zoo(&dir).expect("desk zoo load")
    })
}

struct SslArtifact {
    kind: EncoderKind,
    seed: u64,
    best_val: f64,
    dir: PathBuf,
}

impl SslArtifact {
    fn encoder(&self) -> Encoder<f32> {
        Encoder::load(&self.dir.join("encoder.rnz")).expect("encoder artifact")
    }

    fn emulator(&self) -> ssl::EmulatorWeights<f32> {
        let (params, meta) =
            encoders::ParamSet::<f32>::load(&self.dir.join("emulator.rnz")).expect("emulator");
        let dims = LstmDims::new(
            meta["layers"].as_u64().unwrap() as usize,
            meta["hidden"].as_u64().unwrap() as usize,
            6,
            6,
        );
        ssl::EmulatorWeights::from_params(dims, meta["z_dim"].as_u64().unwrap() as usize, &params)
    }
}

fn accept_ssl_config(seed: u64) -> SslConfig {
    SslConfig::desk(seed)
}

fn ssl_artifacts() -> &'static Vec<SslArtifact> {
    static RUNS: OnceLock<Vec<SslArtifact>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let zoo = desk_zoo();
        let arch = EncoderArch::desk();
        let mut out = Vec::new();
        for kind in [EncoderKind::Stats, EncoderKind::Probe, EncoderKind::IProbe] {
            for seed in SSL_SEEDS {
                let dir = cache_root().join(format!("ssl-{}-{seed}", kind.label()));
                let marker = dir.join("best.json");
                if let Ok(text) = std::fs::read_to_string(&marker) {
                    if let Ok(v) = serde_json::from_str::<serde_json::Value>(&text) {
                        if v["config_seed"] == seed && v["best_val"].is_number() {
                            out.push(SslArtifact {
                                kind,
                                seed,
                                best_val: v["best_val"].as_f64().unwrap(),
                                dir,
                            });
                            continue;
                        }
                    }
                }
                std::fs::create_dir_all(&dir).expect("ssl dir");
                let config = accept_ssl_config(seed);
                let started = std::time::Instant::now();
                let run = ssl::ssl_train(kind, zoo, &config, &arch).expect("ssl run");
                println!(
                    "  [fixture] ssl {} seed {seed}: best val {:.5} (step {}) in {:.0}s",
                    kind.label(),
                    run.best_val,
                    run.best_step,
                    started.elapsed().as_secs_f64()
                );
                run.encoder.save(&dir.join("encoder.rnz")).expect("save encoder");
                let mut em_params = encoders::ParamSet::<f32>::new();
                run.emulator.register(&mut em_params);
                em_params
                    .save(
                        &dir.join("emulator.rnz"),
                        &serde_json::json!({
                            "layers": run.emulator.dims().layers,
                            "hidden": run.emulator.dims().hidden,
                            "z_dim": arch.z_dim,
                        }),
                    )
                    .expect("save emulator");
                ssl::train::write_curves(&dir.join("curves.csv"), &run.curves).expect("curves");
                std::fs::write(
                    &marker,
                    serde_json::to_string_pretty(&serde_json::json!({
                        "config_seed": seed,
                        "kind": kind.label(),
                        "best_val": run.best_val,
                        "best_step": run.best_step,
                    }))
                    .unwrap(),
                )
                .expect("marker");
                out.push(SslArtifact {
                    kind,
                    seed,
                    best_val: run.best_val,
                    dir,
                });
            }
        }
        out
    })
}

fn best_artifact(kind: EncoderKind) -> &'static SslArtifact {
    ssl_artifacts()
        .iter()
        .filter(|a| a.kind == kind)
        .min_by(|a, b| a.best_val.partial_cmp(&b.best_val).unwrap())
        .expect("artifact")
}

// === Criterion 1: exact interrogation counts ===

#[test]
fn a1_interrogation_counts_are_exact() {
    // Interactive identification of all 27 language oracles (k=4, M=3)
    // within M(k-1) = 9 probes.
    let specs = GeneralLanguageSpec::grid(4, 3);
    let mut max_interactive = 0usize;
    let mut correct = 0usize;
    for spec in &specs {
        let run = identify_language_interactive(4, 3, |p| spec.allowed_next(p, false)).unwrap();
        if run.recovered == *spec {
            correct += 1;
        }
        max_interactive = max_interactive.max(run.transcript.count());
    }
    assert_eq!(correct, 27);
    assert!(max_interactive <= 9, "interactive worst case {max_interactive}");

    // The constructed non-interactive top-level probe set has exactly
    // 3^3 - 3^2 = 18 elements and identifies all 27 oracles.
    let probe_set = noninteractive_language_probe_set(4, 3);
    assert_eq!(probe_set.top_level_size(), 18);
    assert_eq!(probe_set.total(), 18);
    for spec in &specs {
        let run = interrogator::language::identify_language_noninteractive(&probe_set, |p| {
            spec.allowed_next(p, false)
        })
        .unwrap();
        assert_eq!(run.recovered, *spec);
    }

    // Tree-based non-interactive identification: exactly |D|-1 = 26
    // probes for each oracle.
    let set = language_family(4, 3);
    let tree = build_identification_tree(&set).unwrap();
    assert_eq!(tree.branch_count(), 26);
    for m in 0..set.len() {
        let t = identify_noninteractive(&set, &tree, |x| set.query(m, x));
        assert_eq!(t.count(), 26);
        assert_eq!(t.identified, Some(m));
    }

    // Constants: one probe. Worst-case family of size L: L-1 probes in
    // the worst case even interactively.
    let constants = interrogator::constants_family(12, 30);
    for m in 0..constants.len() {
        let t = identify_by_single_probe(&constants, |x| constants.query(m, x));
        assert_eq!(t.count(), 1);
        assert_eq!(t.identified, Some(m));
    }
    let l = 12;
    let worst_family = interrogator::worstcase_family(l);
    let wtree = build_identification_tree(&worst_family).unwrap();
    let mut worst = 0usize;
    for m in 0..l {
        let t = identify_interactive_tree(&worst_family, &wtree, |x| worst_family.query(m, x));
        assert_eq!(t.identified, Some(m));
        worst = worst.max(t.count());
    }
    assert_eq!(worst, l - 1);

    println!(
        "ACCEPTANCE A1 interrogation counts: PASS (27/27 interactive <= {max_interactive} <= 9, top-level set 18, tree 26, constants 1, worst-case {})",
        l - 1
    );
}

// === Criterion 2: exponential interactive/non-interactive gap ===

#[test]
fn a2_exponential_gap_grows_with_k() {
    let m_bound = 2u32;
    let mut ratios = Vec::new();
    for k in [4usize, 5, 6] {
        let probe_set = noninteractive_language_probe_set(k, m_bound);
        let closed = NoninteractiveProbeSet::closed_form(k, m_bound);
        assert_eq!(probe_set.total(), closed, "closed form M^(k-1) - M^2 at k={k}");

        let mut interactive_worst = 0usize;
        for spec in GeneralLanguageSpec::grid(k, m_bound) {
            let run =
                identify_language_interactive(k, m_bound, |p| spec.allowed_next(p, false)).unwrap();
            assert_eq!(run.recovered, spec);
            assert!(run.transcript.count() <= m_bound as usize * (k - 1));
            interactive_worst = interactive_worst.max(run.transcript.count());
        }
        ratios.push(probe_set.total() as f64 / interactive_worst as f64);
    }
    let g1 = ratios[1] / ratios[0];
    let g2 = ratios[2] / ratios[1];
    assert!(g1 >= 1.5, "gap growth k=4->5 only {g1:.2} ({ratios:?})");
    assert!(g2 >= 1.5, "gap growth k=5->6 only {g2:.2} ({ratios:?})");
    println!(
        "ACCEPTANCE A2 exponential gap: PASS (ratios {:.2} -> {:.2} -> {:.2}, growth {g1:.2}x, {g2:.2}x)",
        ratios[0], ratios[1], ratios[2]
    );
}

// === Criterion 3: permutation invariance matrix ===

fn l2(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| ((x - y) as f64).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn a3_permutation_invariance_matrix() {
    let dims = LstmDims::new(2, 32, 6, 6);
    let arch = EncoderArch::desk();
    let samples = 20u64;

    let mut enc_rng = RngStream::from_seed(0xA3);
    let fresh: Vec<Encoder<f32>> = EncoderKind::ALL
        .into_iter()
        .map(|kind| Encoder::new(kind, dims, &arch, &mut enc_rng))
        .collect();

    let mut ratios = vec![0.0f64; fresh.len()];
    let mut subject_dev_worst = 0.0f64;
    let mut subject_corrupt_best = 0.0f64;

    for sample in 0..samples {
        let mut rng = RngStream::from_seed(0xA3_00 + sample);
        let theta = LstmWeights::<f32>::init_uniform(dims, &mut rng);
        let psi = LstmWeights::<f32>::init_uniform(dims, &mut rng);
        let perm = PermutationSpec::random(dims.layers, dims.hidden, &mut rng);
        let permuted = apply_permutation(&theta, &perm).unwrap();

        for (i, enc) in fresh.iter().enumerate() {
            let z = enc.encode(&theta).unwrap();
            let zp = enc.encode(&permuted).unwrap();
            let zo = enc.encode(&psi).unwrap();
            ratios[i] += l2(&zp, &z) / l2(&zo, &z) / samples as f64;
        }

        // Subject LSTM: output deviation under the complete permutation
        // and the strongest single-group corruption ratio.
        let seqs: Vec<Vec<Vec<f32>>> = (0..10)
            .map(|_| {
                (0..10)
                    .map(|_| {
                        let mut x = vec![0.0f32; 6];
                        x[rng.index(6)] = 1.0;
                        x
                    })
                    .collect()
            })
            .collect();
        let outputs = |w: &LstmWeights<f32>| -> Vec<f32> {
            seqs.iter()
                .flat_map(|s| lstm_forward(w, s).unwrap().into_iter().flatten())
                .collect()
        };
        let base = outputs(&theta);
        let perm_out = outputs(&permuted);
        let dev = base
            .iter()
            .zip(&perm_out)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        subject_dev_worst = subject_dev_worst.max(dev as f64);

        let other_out = outputs(&psi);
        let denom = l2(&other_out, &base);
        let best_group = ALL_GROUPS
            .iter()
            .map(|g| {
                let corrupted = corrupt_permutation(&theta, &perm, &[*g]).unwrap();
                l2(&outputs(&corrupted), &base) / denom
            })
            .fold(0.0f64, f64::max);
        subject_corrupt_best += best_group / samples as f64;
    }

    let ratio_of = |kind: EncoderKind| -> f64 {
        ratios[EncoderKind::ALL.iter().position(|k| *k == kind).unwrap()]
    };
    for kind in [EncoderKind::Stats, EncoderKind::Dws, EncoderKind::Probe, EncoderKind::IProbe] {
        let r = ratio_of(kind);
        assert!(r <= 1e-4, "{kind:?} complete-permutation ratio {r}");
    }
    for kind in [EncoderKind::Flat, EncoderKind::Transformer] {
        let r = ratio_of(kind);
        assert!(r >= 0.1, "{kind:?} complete-permutation ratio {r}");
    }
    assert!(
        subject_dev_worst <= 1e-5,
        "subject deviates {subject_dev_worst} under complete permutations"
    );
    assert!(
        subject_corrupt_best >= 0.1,
        "no single-group corruption moved the subject: {subject_corrupt_best}"
    );

    println!(
        "ACCEPTANCE A3 permutation invariance: PASS (invariant <= {:.1e}, non-invariant >= {:.2}, subject dev {:.1e}, corruption {:.2})",
        [ratio_of(EncoderKind::Stats), ratio_of(EncoderKind::Dws), ratio_of(EncoderKind::Probe), ratio_of(EncoderKind::IProbe)]
            .into_iter()
            .fold(0.0f64, f64::max),
        ratio_of(EncoderKind::Flat).min(ratio_of(EncoderKind::Transformer)),
        subject_dev_worst,
        subject_corrupt_best,
    );
}

// === Criterion 4: numerical integrity ===

#[test]
fn a4_numerical_integrity() {
    let eps = 1e-5;
    let mut worst_ops = 0.0f64;

    // Every op kind, ten random inputs each.
    let mut rng = RngStream::from_seed(0xA4);
    for trial in 0..10u64 {
        let rand = |rng: &mut RngStream, shape: &[usize]| -> Tensor<f64> {
            let numel = shape.iter().product();
            Tensor::new(
                shape.to_vec(),
                (0..numel).map(|_| rng.uniform(-1.2, 1.2)).collect(),
            )
            .unwrap()
        };
        let a34 = rand(&mut rng, &[3, 4]);
        let b42 = rand(&mut rng, &[4, 2]);
        let c34 = rand(&mut rng, &[3, 4]);
        let row4 = rand(&mut rng, &[4]);
        let scalar = rand(&mut rng, &[1]);
        let wrng = RngStream::from_seed(0xA4_100 + trial);

        type Builder = Box<
            dyn Fn(
                &mut Tape<f64>,
                &[numkit::TensorId],
            ) -> Result<numkit::TensorId, numkit::NumError>,
        >;
        let cases: Vec<(Vec<Tensor<f64>>, Builder)> = vec![
            (vec![a34.clone(), b42.clone()], Box::new(|t, ids| t.matmul(ids[0], ids[1]))),
            (vec![a34.clone(), c34.clone()], Box::new(|t, ids| t.add(ids[0], ids[1]))),
            (vec![a34.clone(), row4.clone()], Box::new(|t, ids| t.add(ids[0], ids[1]))),
            (vec![a34.clone(), scalar.clone()], Box::new(|t, ids| t.add(ids[0], ids[1]))),
            (vec![a34.clone(), c34.clone()], Box::new(|t, ids| t.sub(ids[0], ids[1]))),
            (vec![a34.clone(), c34.clone()], Box::new(|t, ids| t.elementwise_mul(ids[0], ids[1]))),
            (vec![a34.clone()], Box::new(|t, ids| Ok(t.sigmoid(ids[0])))),
            (vec![a34.clone()], Box::new(|t, ids| Ok(t.tanh(ids[0])))),
            (
                vec![a34.clone()],
                Box::new(|t, ids| {
                    let shift = t.constant(Tensor::scalar(0.05));
                    let x = t.add(ids[0], shift)?;
                    Ok(t.relu(x))
                }),
            ),
            (
                vec![a34.clone()],
                Box::new(|t, ids| {
                    let s = t.sigmoid(ids[0]);
                    t.log(s)
                }),
            ),
            (vec![a34.clone()], Box::new(|t, ids| Ok(t.exp(ids[0])))),
            (vec![a34.clone()], Box::new(|t, ids| t.softmax_last_dim(ids[0]))),
            (
                vec![a34.clone(), c34.clone()],
                Box::new(|t, ids| t.concat_last_dim(&[ids[0], ids[1]])),
            ),
            (vec![a34.clone()], Box::new(|t, ids| t.slice_last_dim(ids[0], 1, 2))),
            (vec![a34.clone()], Box::new(|t, ids| t.transpose(ids[0]))),
            (vec![a34.clone()], Box::new(|t, ids| Ok(t.sum_all(ids[0])))),
            (vec![a34.clone()], Box::new(|t, ids| t.mean_all(ids[0]))),
            (vec![a34.clone()], Box::new(|t, ids| Ok(t.scale(ids[0], 1.7)))),
        ];
        for (params, build) in cases {
            let err = grad_check_multi(&params, eps, |tape, ids| {
                let out = build(tape, ids)?;
                let shape = tape.value(out).shape().to_vec();
                let numel: usize = shape.iter().product();
                let mut wr = wrng.clone();
                let w = Tensor::new(
                    shape,
                    (0..numel).map(|_| wr.uniform(0.5, 1.5)).collect(),
                )
                .unwrap();
                let wid = tape.constant(w);
                let prod = tape.elementwise_mul(out, wid)?;
                Ok(tape.sum_all(prod))
            })
            .unwrap();
            worst_ops = worst_ops.max(err);
        }
    }
    assert!(worst_ops <= 1e-4, "op gradchecks: worst {worst_ops}");

    // One full LSTM step + reverse-KL loss.
    let dims = LstmDims::new(2, 4, 6, 6);
    let mut rng = RngStream::from_seed(0xA4_2);
    let subject = LstmWeights::<f64>::init_uniform(dims, &mut rng);
    let named: Vec<Tensor<f64>> = subject
        .named_tensors()
        .into_iter()
        .map(|(_, t)| t.clone())
        .collect();
    let target: Vec<f32> = vec![0.05, 0.1, 0.2, 0.3, 0.25, 0.1];
    let lstm_kl_err = grad_check_multi(&named, eps, |tape, ids| {
        let leaves = rnn_core::LstmLeaves {
            dims,
            per_layer: vec![ids[..16].to_vec(), ids[16..32].to_vec()],
            w_out: ids[32],
            b_out: ids[33],
        };
        let graph = rnn_core::build_graph(tape, &leaves)?;
        let mut state = graph.init_state(tape, 1);
        let x = tape.constant(Tensor::new(vec![1, 6], vec![0.3, -0.2, 0.8, 0.1, -0.5, 0.4])?);
        let q = graph.step(tape, x, &mut state)?;
        let logs = tape.constant(ssl::kl::clamped_log_targets::<f64>(&[target.clone()]));
        let w = tape.constant(Tensor::full(&[1, 6], 1.0));
        ssl::kl::reverse_kl_node(tape, q, logs, w)
    })
    .unwrap();
    assert!(lstm_kl_err <= 1e-4, "lstm+kl gradcheck {lstm_kl_err}");

    // One weight-space layer + sum_all, and its equivariance residual
    // over 20 random permutations.
    let arch = EncoderArch::tiny();
    let mut rng = RngStream::from_seed(0xA4_3);
    let dws_encoder = Encoder::<f64>::new(EncoderKind::Dws, dims, &arch, &mut rng);
    let dws_subject = LstmWeights::<f64>::init_uniform(dims, &mut rng);
    let names = dws_encoder.params.names();
    let tensors = dws_encoder.params.tensors();
    let mut sample_rng = RngStream::from_seed(0xA4_4);
    let dws_err = grad_check_sampled(&tensors, eps, 200, &mut sample_rng, |tape, ids| {
        let pids = ParamIds::from_leaves(&names, ids.to_vec());
        let fm = encoders::lift_subject(tape, &pids, &dws_subject)?;
        let out = encoders::dws_layer(tape, &pids, "dws0", &fm, dims)?;
        let mut total = tape.sum_all(out.w_out);
        for id in out
            .w_ih
            .iter()
            .chain(out.w_hh.iter())
            .chain(out.b_ih.iter())
            .chain(out.b_hh.iter())
            .chain(std::iter::once(&out.b_out))
        {
            let s = tape.sum_all(*id);
            total = tape.add(total, s)?;
        }
        Ok(total)
    })
    .unwrap();
    assert!(dws_err <= 1e-4, "dws layer gradcheck {dws_err}");

    let mut equi_worst = 0.0f64;
    for trial in 0..20 {
        let mut trng = RngStream::from_seed(0xA4_500 + trial);
        let perm = PermutationSpec::random(dims.layers, dims.hidden, &mut trng);
        let theta = LstmWeights::<f64>::init_uniform(dims, &mut trng);
        let permuted = apply_permutation(&theta, &perm).unwrap();

        let run = |w: &LstmWeights<f64>| -> Vec<(encoders::dws::DwsGroup, Tensor<f64>)> {
            let mut tape = Tape::new();
            let pids = dws_encoder.params.load_on_tape(&mut tape, false);
            let fm = encoders::lift_subject(&mut tape, &pids, w).unwrap();
            let out = encoders::dws_layer(&mut tape, &pids, "dws0", &fm, dims).unwrap();
            let mut vals = Vec::new();
            for (l, id) in out.w_ih.iter().enumerate() {
                vals.push((encoders::dws::DwsGroup::WIh(l), tape.value(*id).clone()));
            }
            for (l, id) in out.w_hh.iter().enumerate() {
                vals.push((encoders::dws::DwsGroup::WHh(l), tape.value(*id).clone()));
            }
            for (l, id) in out.b_ih.iter().enumerate() {
                vals.push((encoders::dws::DwsGroup::BIh(l), tape.value(*id).clone()));
            }
            for (l, id) in out.b_hh.iter().enumerate() {
                vals.push((encoders::dws::DwsGroup::BHh(l), tape.value(*id).clone()));
            }
            vals.push((encoders::dws::DwsGroup::WOut, tape.value(out.w_out).clone()));
            vals.push((encoders::dws::DwsGroup::BOut, tape.value(out.b_out).clone()));
            vals
        };
        let base = run(&theta);
        let perm_run = run(&permuted);
        for ((group, b), (_, p)) in base.iter().zip(perm_run.iter()) {
            let expected = encoders::permute_positions(b, *group, dims, &perm);
            for (x, y) in expected.data().iter().zip(p.data()) {
                equi_worst = equi_worst.max((x - y).abs());
            }
        }
    }
    assert!(equi_worst <= 1e-5, "dws equivariance residual {equi_worst}");

    // Every encoder's parameter gradients on an H = 4 subject.
    let mut enc_worst = 0.0f64;
    let mut rng = RngStream::from_seed(0xA4_6);
    let h4_subject = LstmWeights::<f64>::init_uniform(dims, &mut rng);
    for kind in EncoderKind::ALL {
        let enc = Encoder::<f64>::new(kind, dims, &arch, &mut rng);
        let names = enc.params.names();
        let tensors = enc.params.tensors();
        let mut srng = RngStream::from_seed(0xA4_700);
        let err = grad_check_sampled(&tensors, eps, 120, &mut srng, |tape, ids| {
            let pids = ParamIds::from_leaves(&names, ids.to_vec());
            let z = enc.encode_on_tape(tape, &pids, &h4_subject)?;
            let w = tape.constant(Tensor::new(
                vec![1, arch.z_dim],
                (0..arch.z_dim).map(|i| 0.4 + 0.3 * i as f64).collect(),
            )?);
            let prod = tape.elementwise_mul(z, w)?;
            Ok(tape.sum_all(prod))
        })
        .unwrap();
        enc_worst = enc_worst.max(err);
        assert!(err <= 1e-4, "{kind:?} encoder gradcheck {err}");
    }

    println!(
        "ACCEPTANCE A4 numerical integrity: PASS (ops {worst_ops:.2e}, lstm+kl {lstm_kl_err:.2e}, dws {dws_err:.2e}, equivariance {equi_worst:.2e}, encoders {enc_worst:.2e})"
    );
}

// === Criterion 5: zoo trainability ===

#[test]
fn a5_zoo_trainability() {
    // A single desk-scale model on the all-zero-offset language reaches
    // 0.9 generation accuracy within 2000 steps.
    let task = DatasetLanguageSpec::new(0, 0, 0).unwrap();
    let config = ZooConfig::desk(ACCEPT_SEED);
    let rng = RngStream::from_seed(0xA5);
    let ckpts = zoo::train_model(&task, &config, &rng).expect("single model");
    let final_acc = ckpts.last().unwrap().accuracy;
    assert!(final_acc >= 0.9, "single-model accuracy {final_acc}");

    // Median final accuracy over the 64-model desk zoo beats the
    // step-0 median by at least 0.3.
    let zoo = desk_zoo();
    let median = |mut v: Vec<f64>| -> f64 {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };
    let step0: Vec<f64> = zoo
        .records()
        .iter()
        .map(|r| r.checkpoints.first().unwrap().accuracy)
        .collect();
    let final_: Vec<f64> = zoo
        .records()
        .iter()
        .map(|r| r.checkpoints.last().unwrap().accuracy)
        .collect();
    assert_eq!(zoo.records().len(), 64);
    let (m0, m1) = (median(step0), median(final_));
    assert!(
        m1 - m0 >= 0.3,
        "median improvement {m0:.3} -> {m1:.3} below 0.3"
    );

    println!(
        "ACCEPTANCE A5 zoo trainability: PASS (single model {final_acc:.2}, zoo medians {m0:.2} -> {m1:.2})"
    );
}

// === Criterion 6: SSL ordering and emulation quality ===

#[test]
fn a6_ssl_ordering_and_emulation() {
    let stats_best = best_artifact(EncoderKind::Stats).best_val;
    let probe_best = best_artifact(EncoderKind::Probe).best_val;
    let iprobe_best = best_artifact(EncoderKind::IProbe).best_val;

    assert!(
        iprobe_best < stats_best,
        "interactive probing {iprobe_best:.5} not below layer-wise stats {stats_best:.5}"
    );
    assert!(
        probe_best < stats_best,
        "non-interactive probing {probe_best:.5} not below layer-wise stats {stats_best:.5}"
    );

    // Emulated-vs-original accuracy correlation for the best
    // interactive-probing run on the validation split.
    let artifact = best_artifact(EncoderKind::IProbe);
    let encoder = artifact.encoder();
    let emulator = artifact.emulator();
    let mut rng = RngStream::from_seed(0xA6);
    let points = evaluate_emulation(
        &encoder,
        &emulator,
        desk_zoo(),
        Split::Val,
        16,
        15,
        32,
        encoding::TOTAL_LEN,
        &mut rng,
    )
    .expect("emulation eval");
    let orig: Vec<f64> = points.iter().map(|p| p.original_mean).collect();
    let emu: Vec<f64> = points.iter().map(|p| p.emulated_mean).collect();
    let r = pearson(&orig, &emu);
    assert!(r >= 0.5, "emulated-vs-original Pearson r = {r:.3}");

    println!(
        "ACCEPTANCE A6 ssl ordering: PASS (val losses: iprobe {iprobe_best:.4} / probe {probe_best:.4} < stats {stats_best:.4}; Pearson r {r:.3})"
    );
}

// === Criterion 7: downstream task prediction ===

#[test]
fn a7_downstream_task_prediction() {
    let zoo = desk_zoo();
    let pool_languages = ZooConfig::desk(ACCEPT_SEED)
        .pool()
        .len();
    let chance = 1.0 / pool_languages as f64;

    let pred_config = downstream::PredictorConfig {
        steps: 1500,
        seed: 0xA7,
        ..Default::default()
    };

    // Held-out exact-task accuracy (val + held OOD half) from frozen
    // representations.
    let heldout_exact = |kind: EncoderKind| -> f64 {
        let artifact = best_artifact(kind);
        let encoder = artifact.encoder();
        let examples = downstream::collect_examples(zoo, &encoder).expect("examples");
        let run = downstream::train_property_predictor(
            &examples,
            downstream::TargetKind::TaskThreeHot,
            &pred_config,
        )
        .expect("predictor");
        let held: Vec<&downstream::PropertyExample> = examples
            .iter()
            .filter(|e| {
                matches!(
                    e.group,
                    downstream::EvalGroup::Val | downstream::EvalGroup::OodHeld
                )
            })
            .collect();
        // Re-evaluate exact-task on the union of held-out groups.
        let mut tape = Tape::new();
        let ids = run.params.load_on_tape(&mut tape, false);
        let z_dim = held[0].z.len();
        let mut x = Tensor::<f32>::zeros(&[held.len(), z_dim]);
        for (row, ex) in held.iter().enumerate() {
            x.data_mut()[row * z_dim..(row + 1) * z_dim].copy_from_slice(&ex.z);
        }
        let xid = tape.constant(x);
        let logits = run.def.apply(&mut tape, &ids, xid).unwrap();
        let preds = tape.value(logits);
        let dim = downstream::predictor::THREE_HOT_DIM;
        let hits = held
            .iter()
            .enumerate()
            .filter(|(row, ex)| {
                downstream::predictor::exact_task_match(
                    &preds.data()[row * dim..(row + 1) * dim],
                    &ex.task,
                )
            })
            .count();
        hits as f64 / held.len() as f64
    };

    let iprobe_acc = heldout_exact(EncoderKind::IProbe);
    let stats_acc = heldout_exact(EncoderKind::Stats);

    assert!(
        iprobe_acc >= 2.0 * chance,
        "frozen interactive-probing exact-task {iprobe_acc:.3} below 2x chance {:.3}",
        2.0 * chance
    );
    assert!(
        iprobe_acc >= stats_acc,
        "frozen interactive-probing {iprobe_acc:.3} below stats baseline {stats_acc:.3}"
    );

    // Qualitative check at matched predictor budgets: pre-trained
    // probing representations beat an end-to-end supervised probing
    // encoder on the held-out OOD half-protocol groups.
    let sup_config = downstream::PredictorConfig {
        steps: 400,
        batch_size: 16,
        seed: 0xA7_2,
        ..Default::default()
    };
    let examples = downstream::predictor::load_supervised_examples(zoo).expect("supervised data");
    let supervised = downstream::train_supervised_baseline(
        EncoderKind::IProbe,
        &examples,
        downstream::TargetKind::TaskThreeHot,
        &sup_config,
        &EncoderArch::desk(),
    )
    .expect("supervised baseline");
    let supervised_held = if supervised.ood_held_exact.is_nan() {
        supervised.val_exact
    } else {
        0.5 * (supervised.ood_held_exact + supervised.val_exact)
    };
    println!(
        "  [info] supervised probing held-out exact-task {supervised_held:.3} vs pre-trained {iprobe_acc:.3}"
    );

    println!(
        "ACCEPTANCE A7 downstream task prediction: PASS (iprobe {iprobe_acc:.3} >= 2x chance {:.3}, stats {stats_acc:.3}, supervised {supervised_held:.3})",
        2.0 * chance
    );
}

// === Criterion 8: formal-language engine oracles ===

#[test]
fn a8_language_engine_oracles() {
    // Membership round-trip and prefix consistency, all 216 languages,
    // n up to min_n + 3.
    for spec in DatasetLanguageSpec::grid() {
        for n in spec.min_n()..=spec.min_n() + 3 {
            let s = spec.string_for_n(n).unwrap();
            assert!(spec.is_member(&s), "{spec} n={n}");
            for cut in 0..s.len() {
                match spec.allowed_next(&s[..cut], false) {
                    AllowedNext::Dead => panic!("{spec}: dead prefix at {cut}"),
                    AllowedNext::Next(set) => {
                        assert!(set.contains(&s[cut]), "{spec}: prefix inconsistency at {cut}")
                    }
                }
            }
        }
    }

    // Pairwise distinguishability of all 27 general oracles (k=4, M=3)
    // within probe length 4M.
    let specs = GeneralLanguageSpec::grid(4, 3);
    let cap = 12usize;
    let mut domain: Vec<Vec<u8>> = Vec::new();
    let mut frontier: Vec<Vec<u8>> = vec![Vec::new()];
    while let Some(p) = frontier.pop() {
        if p.len() >= cap {
            continue;
        }
        for t in 1..=4u8 {
            let mut q = p.clone();
            q.push(t);
            if specs.iter().any(|s| !s.allowed_next(&q, false).is_dead()) {
                domain.push(q.clone());
                frontier.push(q);
            }
        }
    }
    for i in 0..specs.len() {
        for j in i + 1..specs.len() {
            assert!(
                domain
                    .iter()
                    .any(|p| specs[i].allowed_next(p, false) != specs[j].allowed_next(p, false)),
                "{} vs {} indistinguishable within length {cap}",
                specs[i],
                specs[j]
            );
        }
    }

    println!(
        "ACCEPTANCE A8 language engine: PASS (216 languages round-trip, 27 oracles pairwise distinct within length {cap})"
    );
}
