use hyperpretrain::losses::LossKind;
use hyperpretrain::model::{EmbeddingTable, TaVariant};
use hyperpretrain::pipeline::ablation::run_cell;
use hyperpretrain::pipeline::coldstart::{cold_start_metrics, select_cold_users};
use hyperpretrain::pipeline::eval::{evaluate_embeddings, inference_embeddings, ndcg_at_k, rank_items, recall_at_k};
use hyperpretrain::pipeline::train::{finetune_with_log, pretrain_with_log};
use hyperpretrain::pipeline::*;
use hyperpretrain::Error;
use proptest::prelude::*;

fn small_fixture() -> InteractionDataset {
    generate_synthetic_dataset(40, 20, 4, 0.05, 5).unwrap()
}

fn quick_config() -> TrainConfig {
    TrainConfig {
        dim: 8,
        epochs_pretrain: 3,
        epochs_finetune: 3,
        batch_size: 64,
        seed: 5,
        ..Default::default()
    }
}

#[test]
fn zero_epochs_return_the_initial_table() {
    let ds = small_fixture();
    let cfg = TrainConfig {
        epochs_pretrain: 0,
        epochs_finetune: 0,
        ..quick_config()
    };
    let init = EmbeddingTable::init(ds.num_users, ds.num_items, cfg.dim, cfg.seed).unwrap();
    assert_eq!(pretrain(&ds, &cfg).unwrap(), init);
    assert_eq!(finetune(init.clone(), &ds, &cfg).unwrap(), init);
}

#[test]
fn training_is_deterministic_under_seed() {
    let ds = small_fixture();
    let cfg = quick_config();
    let a = finetune(pretrain(&ds, &cfg).unwrap(), &ds, &cfg).unwrap();
    let b = finetune(pretrain(&ds, &cfg).unwrap(), &ds, &cfg).unwrap();
    assert_eq!(a, b);
    let other = TrainConfig { seed: 6, ..cfg };
    assert_ne!(a, finetune(pretrain(&ds, &other).unwrap(), &ds, &other).unwrap());
}

#[test]
fn full_batch_pretraining_loss_strictly_decreases() {
    let ds = generate_synthetic_dataset(200, 100, 4, 0.05, 42).unwrap();
    let cfg = TrainConfig {
        seed: 42,
        epochs_pretrain: 10,
        batch_size: ds.train_edges.len(),
        ..Default::default()
    };
    let (_, log) = pretrain_with_log(&ds, &cfg).unwrap();
    assert_eq!(log.epoch_losses.len(), 10);
    for w in log.epoch_losses.windows(2) {
        assert!(w[1] < w[0], "{:?}", log.epoch_losses);
    }
}

#[test]
fn finetune_rejects_mismatched_tables() {
    let ds = small_fixture();
    let cfg = quick_config();
    let wrong_dim = EmbeddingTable::init(ds.num_users, ds.num_items, cfg.dim + 1, 0).unwrap();
    assert!(matches!(finetune(wrong_dim, &ds, &cfg), Err(Error::DimensionMismatch { .. })));
    let wrong_rows = EmbeddingTable::init(ds.num_users + 1, ds.num_items, cfg.dim, 0).unwrap();
    assert!(finetune(wrong_rows, &ds, &cfg).is_err());
}

#[test]
fn huge_learning_rate_reports_divergence() {
    let ds = small_fixture();
    let cfg = TrainConfig {
        lr: 1e300,
        pretrain_loss: LossKind::Alignment,
        ..quick_config()
    };
    let err = pretrain(&ds, &cfg).unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");
}

#[test]
fn finetune_log_records_no_attention() {
    let ds = small_fixture();
    let cfg = quick_config();
    let (_, log) = finetune_with_log(EmbeddingTable::init(40, 20, 8, 1).unwrap(), &ds, &cfg).unwrap();
    assert_eq!(log.attention.vectors, 0);
    assert_eq!(log.epoch_losses.len(), 3);
}

#[test]
fn no_ta_cell_equals_full_with_zero_intensity() {
    let ds = small_fixture();
    let no_ta = TrainConfig {
        ta_variant: TaVariant::NoTa,
        ..quick_config()
    };
    let full_zero = TrainConfig {
        ta_variant: TaVariant::Full,
        gamma: 0.0,
        ..quick_config()
    };
    assert_eq!(run_cell(&ds, &no_ta).unwrap(), run_cell(&ds, &full_zero).unwrap());
}

#[test]
fn ablation_grid_shape() {
    let ds = small_fixture();
    let cfg = TrainConfig {
        epochs_pretrain: 1,
        epochs_finetune: 1,
        ..quick_config()
    };
    let report = run_ablation(&ds, &cfg).unwrap();
    assert_eq!(report.tables.len(), 2);
    assert_eq!(report.tables[0].rows.len(), 4);
    assert_eq!(report.tables[1].rows.len(), 10);
    assert!(report.tables[1].rows.iter().any(|r| r.label == "(Align., BPR)"));
}

#[test]
fn cold_start_selection_and_report() {
    let ds = small_fixture();
    let cfg = quick_config();
    let report = cold_start_eval(&ds, &cfg, 0.2).unwrap();
    let table = &report.tables[0];
    assert_eq!(table.cold_start_ratio, Some(0.2));
    let labels: Vec<&str> = table.rows.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(labels, ["full", "no_auxiliary"]);
    let cold = select_cold_users(ds.num_users, 0.2, cfg.seed).unwrap();
    let with_test = cold.iter().filter(|&&u| ds.test_edges.iter().any(|e| e.0 == u)).count();
    assert_eq!(table.rows[0].metrics.users_evaluated, with_test);
    assert!(cold_start_eval(&ds, &cfg, 1.0).is_err());
}

#[test]
fn cold_user_inference_embedding_comes_from_fed_back_edges() {
    let ds = small_fixture();
    let cfg = quick_config();
    let cold = select_cold_users(ds.num_users, 0.1, cfg.seed).unwrap();
    let table = EmbeddingTable::init(ds.num_users, ds.num_items, cfg.dim, 9).unwrap();
    let (fu, _) = inference_embeddings(&table, &ds.train_edges).unwrap();
    for &u in &cold {
        let items: Vec<usize> = ds.train_edges.iter().filter(|e| e.0 == u).map(|e| e.1).collect();
        let mut expected = vec![0.0; cfg.dim];
        for &i in &items {
            let holders: Vec<usize> = ds.train_edges.iter().filter(|e| e.1 == i).map(|e| e.0).collect();
            for &v in &holders {
                for k in 0..cfg.dim {
                    expected[k] += table.user_emb.get(v, k) / holders.len() as f64 / items.len() as f64;
                }
            }
        }
        for k in 0..cfg.dim {
            assert!((fu.get(u, k) - expected[k]).abs() < 1e-12);
        }
    }
    let m = cold_start_metrics(&ds, &cfg, &cold, true).unwrap();
    assert!(m.recall.iter().chain(&m.ndcg).all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn evaluation_masks_training_items() {
    let ds = small_fixture();
    let table = EmbeddingTable::init(ds.num_users, ds.num_items, 8, 0).unwrap();
    let m = evaluate(&table, &ds, &[5, 10]).unwrap();
    assert!(m.recall[0] <= m.recall[1]);
    assert!(m.recall.iter().chain(&m.ndcg).all(|v| (0.0..=1.0).contains(v)));
}

proptest! {
    #[test]
    fn ranking_never_returns_masked_items(
        scores in proptest::collection::vec(-5.0f64..5.0, 1..40),
        mask_bits in proptest::collection::vec(any::<bool>(), 40),
        k in 1usize..50,
    ) {
        let masked: Vec<usize> = (0..scores.len()).filter(|&i| mask_bits[i]).collect();
        let ranked = rank_items(&scores, &masked, k);
        prop_assert_eq!(ranked.len(), k.min(scores.len() - masked.len()));
        prop_assert!(ranked.iter().all(|i| masked.binary_search(i).is_err()));
        for w in ranked.windows(2) {
            prop_assert!(scores[w[0]] > scores[w[1]] || (scores[w[0]] == scores[w[1]] && w[0] < w[1]));
        }
    }

    #[test]
    fn metrics_are_bounded_and_recall_monotone(
        perm_seed in any::<u64>(),
        n in 2usize..30,
        test_bits in proptest::collection::vec(any::<bool>(), 30),
    ) {
        use rand::{seq::SliceRandom, SeedableRng};
        let mut ranked: Vec<usize> = (0..n).collect();
        ranked.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed));
        let mut test: Vec<usize> = (0..n).filter(|&i| test_bits[i]).collect();
        if test.is_empty() {
            test.push(0);
        }
        let mut prev = 0.0;
        for k in 1..=n {
            let r = recall_at_k(&ranked, &test, k);
            let g = ndcg_at_k(&ranked, &test, k);
            prop_assert!((0.0..=1.0).contains(&r));
            prop_assert!((0.0..=1.0 + 1e-12).contains(&g));
            prop_assert!(r >= prev);
            prev = r;
        }
        prop_assert_eq!(recall_at_k(&ranked, &test, n), 1.0);
    }

    #[test]
    fn split_is_a_partition(
        edges in proptest::collection::vec((0usize..10, 0usize..15), 2..80),
        fraction in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let mut distinct = edges.clone();
        distinct.sort_unstable();
        distinct.dedup();
        prop_assume!(distinct.len() >= 2);
        let (train, test) = split_interactions(&edges, fraction, seed).unwrap();
        let mut all = train.clone();
        all.extend(&test);
        all.sort_unstable();
        prop_assert_eq!(all, distinct);
        for &(u, _) in &test {
            prop_assert!(train.iter().any(|e| e.0 == u));
        }
    }

    #[test]
    fn evaluation_users_all_have_test_items(seed in 0u64..20) {
        let ds = generate_synthetic_dataset(20, 8, 2, 0.1, seed).unwrap();
        let t = EmbeddingTable::init(20, 8, 3, seed).unwrap();
        let train = ds.train_items_by_user();
        let test = ds.test_items_by_user();
        let m = evaluate_embeddings(&t.user_emb, &t.item_emb, &train, &test, &[1, 3], None).unwrap();
        prop_assert_eq!(m.users_evaluated, test.iter().filter(|t| !t.is_empty()).count());
    }
}
