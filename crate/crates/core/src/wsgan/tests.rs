use super::*;
use crate::data::Dataset;
use crate::diffcore::{Graph, Tensor};
use crate::harness::{random_lf_specs, synth_dataset, DatasetSpec, LfSpecRanges};
use crate::weaksup::{coverage_filter, generate_synthetic_lfs, majority_vote, LabelMatrix};

fn small(n: usize, seed: u64) -> (Dataset, LabelMatrix) {
    let spec = DatasetSpec {
        n: n.max(400),
        seed,
        ..Default::default()
    };
    let d = synth_dataset(&spec).unwrap();
    let specs = random_lf_specs(4, &LfSpecRanges::default(), seed + 100).unwrap();
    let l = generate_synthetic_lfs(&d.labels, 4, &specs).unwrap();
    (d, l)
}

fn cfg(mode: Mode, epochs: usize) -> TrainingConfig {
    TrainingConfig {
        mode,
        epochs,
        seed: 5,
        ..Default::default()
    }
}

#[test]
fn zero_epochs_returns_initial_bundle() {
    let (d, l) = small(64, 1);
    let c = cfg(Mode::Encoder, 0);
    let (b, h) = train(&d, &l, &c).unwrap();
    assert!(h.is_empty());
    assert_eq!(b, initialize(&d, &l, &c).unwrap());
}

#[test]
fn training_is_deterministic() {
    let (d, l) = small(96, 2);
    let c = cfg(Mode::Encoder, 2);
    let (b1, h1) = train(&d, &l, &c).unwrap();
    let (b2, h2) = train(&d, &l, &c).unwrap();
    assert_eq!(h1, h2);
    assert_eq!(b1.store, b2.store);
    assert_eq!(h1.len(), 2);
    for r in &h1.records {
        assert!(r.d_loss.is_finite() && r.g_loss.is_finite() && r.align_loss.is_finite());
    }
}

#[test]
fn zero_alignment_weight_matches_plain_infogan() {
    let (d, l) = small(96, 3);
    let mut traces = Vec::new();
    for (mode, beta) in [(Mode::Encoder, 0.0), (Mode::InfoGan, 1.0)] {
        let c = TrainingConfig {
            align_weight: beta,
            ..cfg(mode, 2)
        };
        let mut b = initialize(&d, &l, &c).unwrap();
        let mut h = TrainingHistory::default();
        let mut trace = Vec::new();
        fit(&mut b, &d, &l, 2, &mut h, Some(&mut trace)).unwrap();
        traces.push(trace);
    }
    assert_eq!(traces[0].len(), traces[1].len());
    for (a, b) in traces[0].iter().zip(&traces[1]) {
        assert_eq!(a.d_loss.to_bits(), b.d_loss.to_bits());
        assert_eq!(a.g_loss.to_bits(), b.g_loss.to_bits());
        assert_eq!(a.info_loss.to_bits(), b.info_loss.to_bits());
    }
    assert!(traces[0].iter().any(|s| s.align_loss > 0.0));
}

#[test]
fn fresh_encoder_is_near_uniform_and_agrees_with_majority_vote() {
    let (d, l) = small(300, 4);
    let b = initialize(&d, &l, &cfg(Mode::Encoder, 0)).unwrap();
    let h = heads(&b, &d.features).unwrap();
    assert!(h.theta.data().iter().all(|&t| (t - 0.5).abs() <= 0.05));
    let pl = predict_pseudolabels(&b, &d.features, &l).unwrap();
    let mv = majority_vote(&l).crisp();
    let crisp = pl.table.crisp();
    for i in coverage_filter(&l) {
        let mut counts = [0usize; 5];
        for &v in l.row(i) {
            counts[v as usize] += 1;
        }
        let top = *counts[1..].iter().max().unwrap();
        if counts[1..].iter().filter(|&&c| c == top).count() > 1 {
            continue;
        }
        assert_eq!(crisp[i], mv[i], "row {i}");
    }
}

#[test]
fn routing_follows_coverage() {
    let (d, l) = small(200, 5);
    let b = initialize(&d, &l, &cfg(Mode::Vector, 0)).unwrap();
    let pl = predict_pseudolabels(&b, &d.features, &l).unwrap();
    let covered = coverage_filter(&l);
    let lf_rows: Vec<usize> = (0..l.n())
        .filter(|&i| pl.sources[i] == PlSource::Lf)
        .collect();
    assert_eq!(lf_rows, covered);
    let h = heads(&b, &d.features).unwrap();
    for i in (0..l.n()).filter(|i| !covered.contains(i)) {
        assert_eq!(pl.table.row(i), h.f1.row_slice(i));
    }
    let (p, src) = predict_pseudolabel(&b, d.features.row_slice(0), None).unwrap();
    assert_eq!(src, PlSource::Synthetic);
    assert_eq!(p.as_slice(), h.f1.row_slice(0));
}

#[test]
fn weight_path_never_reaches_the_trunk() {
    let (d, l) = small(64, 6);
    let b = initialize(&d, &l, &cfg(Mode::Encoder, 0)).unwrap();
    let covered = coverage_filter(&l);
    let x = d.features.select_rows(&covered[..8]);
    let votes = l.select_rows(&covered[..8]);
    for part in ["f2", "penalty"] {
        let mut g = Graph::new();
        let t = alignment_loss(&mut g, &b, &x, &votes, 0).unwrap().unwrap();
        let loss = if part == "f2" { t.f2_ce } else { t.penalty };
        let grads = g.backward(loss).unwrap();
        for id in b.trunk_params() {
            if let Some(gr) = grads.param(id) {
                assert!(
                    gr.data().iter().all(|&v| v == 0.0),
                    "{part} moved {}",
                    b.store.name(id)
                );
            }
        }
        let a = grads.param(b.a_head.weight).unwrap();
        assert!(a.data().iter().any(|&v| v != 0.0) || part == "penalty");
    }
}

#[test]
fn alignment_terms_match_a_direct_evaluation() {
    let (d, l) = small(64, 7);
    let b = initialize(&d, &l, &cfg(Mode::Vector, 0)).unwrap();
    let covered = coverage_filter(&l);
    let x = d.features.select_rows(&covered[..6]);
    let votes = l.select_rows(&covered[..6]);
    let mut g = Graph::new();
    let t = alignment_loss(&mut g, &b, &x, &votes, 3).unwrap().unwrap();
    assert!((t.multiplier - 4.0 / 5.5).abs() < 1e-15);
    // θ = sigmoid(0) = 0.5 exactly, so the penalty vanishes
    assert_eq!(g.value(t.penalty).item(), 0.0);
    let h = heads(&b, &x).unwrap();
    let mut ce = 0.0;
    for i in 0..6 {
        let y = crate::weaksup::weighted_softmax_posterior(votes.row(i), &[0.5; 12], 4).unwrap();
        let row = Tensor::row(h.q.row_slice(i));
        let mut g2 = Graph::new();
        let q = g2.input(row);
        let f = b.interface_f1(&mut g2, q).unwrap();
        for k in 0..4 {
            ce -= y[k] * g2.value(f).get(0, k).max(1e-7).ln();
        }
    }
    assert!((g.value(t.f1_ce).item() - ce / 6.0).abs() < 1e-12);

    let mut g = Graph::new();
    let empty = LabelMatrix::new(0, 12, 4, vec![]).unwrap();
    assert!(alignment_loss(&mut g, &b, &Tensor::zeros(0, 2), &empty, 0)
        .unwrap()
        .is_none());
}

#[test]
fn sampling_contracts() {
    let (d, l) = small(64, 8);
    let b = initialize(&d, &l, &cfg(Mode::Encoder, 0)).unwrap();
    let (x, codes) = generate_samples(&b, 0, CodeSpec::Uniform, 1).unwrap();
    assert_eq!((x.rows(), codes.len()), (0, 0));
    let (_, codes) = generate_samples(&b, 50, CodeSpec::Fixed(2), 1).unwrap();
    assert!(codes.iter().all(|&c| c == 2));
    assert_eq!(
        generate_samples(&b, 30, CodeSpec::Uniform, 4).unwrap(),
        generate_samples(&b, 30, CodeSpec::Uniform, 4).unwrap()
    );
    assert!(generate_samples(&b, 3, CodeSpec::Fixed(4), 1).is_err());
}

#[test]
fn augmentation_contracts() {
    let (d, l) = small(200, 9);
    let b = initialize(&d, &l, &cfg(Mode::Encoder, 0)).unwrap();
    let same =
        augment_dataset(&b, &d, 0, AugmentMode::SyntheticPl, None, 3, f64::INFINITY).unwrap();
    assert_eq!(same.dataset, d);
    assert!(augment_dataset(&b, &d, 10, AugmentMode::LfPl, None, 3, f64::INFINITY).is_err());
    let aug =
        augment_dataset(&b, &d, 40, AugmentMode::SyntheticPl, None, 3, f64::INFINITY).unwrap();
    assert_eq!(aug.dataset.n(), d.n() + 40);
    let (x, _) = generate_samples(&b, 40, CodeSpec::Uniform, 3).unwrap();
    assert_eq!(
        aug.synthetic_labels,
        heads(&b, &x).unwrap().f1.argmax_rows()
    );
    assert_eq!(
        &aug.dataset.labels[d.n()..],
        aug.synthetic_labels.as_slice()
    );
}

#[test]
fn checkpoint_resume_continues_the_same_run() {
    let (d, l) = small(80, 10);
    let c = cfg(Mode::Encoder, 2);
    let (full, hist_full) = train(&d, &l, &c).unwrap();

    let one = TrainingConfig {
        epochs: 1,
        ..c.clone()
    };
    let (half, mut hist) = train(&d, &l, &one).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.json");
    save_checkpoint(&half, &path).unwrap();
    let mut resumed = load_checkpoint(&path).unwrap();
    assert_eq!(resumed, half);
    fit(&mut resumed, &d, &l, 1, &mut hist, None).unwrap();
    assert_eq!(resumed.store, full.store);
    assert_eq!(hist, hist_full);

    std::fs::write(&path, r#"{"version": 99, "bundle": null}"#).unwrap();
    assert!(matches!(
        load_checkpoint(&path),
        Err(crate::Error::CheckpointVersion(99))
    ));
}

#[test]
fn history_csv_columns() {
    let (d, l) = small(48, 11);
    let (_, h) = train(&d, &l, &cfg(Mode::InfoGan, 1)).unwrap();
    let mut buf = Vec::new();
    write_history_csv(&h, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(
        text.starts_with("epoch,d_loss,g_loss,info_loss,align_loss,penalty,ari,pl_accuracy\n0,")
    );
    let mut buf = Vec::new();
    write_history_csv(&TrainingHistory::default(), &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);
}

#[test]
fn non_finite_loss_names_term_and_epoch() {
    let (d, l) = small(32, 12);
    let c = cfg(Mode::Encoder, 1);
    let mut b = initialize(&d, &l, &c).unwrap();
    let w = b.generator.layers[0].weight;
    b.store.get_mut(w).data_mut()[0] = f64::NAN;
    let mut h = TrainingHistory::default();
    let err = fit(&mut b, &d, &l, 1, &mut h, None).unwrap_err();
    assert!(
        matches!(
            err,
            crate::Error::NonFiniteLoss {
                term: "discriminator",
                epoch: 0
            }
        ),
        "{err}"
    );
}

#[test]
fn uncovered_label_matrix_rejected_unless_plain() {
    let (d, _) = small(32, 14);
    let none = LabelMatrix::new(d.n(), 3, 4, vec![0; 3 * d.n()]).unwrap();
    assert!(train(&d, &none, &cfg(Mode::Encoder, 1)).is_err());
    assert!(train(&d, &none, &cfg(Mode::InfoGan, 1)).is_ok());
}
