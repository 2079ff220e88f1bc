use super::config::TrainConfig;
use super::eval::RankingMetrics;

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub label: String,
    pub metrics: RankingMetrics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportTable {
    pub title: String,
    pub cold_start_ratio: Option<f64>,
    pub rows: Vec<ReportRow>,
}

/// Evaluation results: one or more tables sharing the same K list.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub ks: Vec<usize>,
    pub seed: u64,
    pub epochs_pretrain: usize,
    pub epochs_finetune: usize,
    pub tables: Vec<ReportTable>,
}

impl EvalReport {
    pub fn new(config: &TrainConfig) -> Self {
        Self {
            ks: config.eval_ks.clone(),
            seed: config.seed,
            epochs_pretrain: config.epochs_pretrain,
            epochs_finetune: config.epochs_finetune,
            tables: Vec::new(),
        }
    }

    pub fn single(config: &TrainConfig, title: &str, label: &str, metrics: RankingMetrics) -> Self {
        let mut report = Self::new(config);
        report.tables.push(ReportTable {
            title: title.to_string(),
            cold_start_ratio: None,
            rows: vec![ReportRow {
                label: label.to_string(),
                metrics,
            }],
        });
        report
    }

    pub fn rows(&self) -> impl Iterator<Item = (&ReportTable, &ReportRow)> {
        self.tables.iter().flat_map(|t| t.rows.iter().map(move |r| (t, r)))
    }
}
