use std::collections::BTreeSet;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use super::{Bundle, PipelineConfig, PipelineError, Stage};
use crate::analytics::{self, correlate, CorrelationMethod, ExternalSeries, Grid};
use crate::chart::{BarChart, Heatmap, LineChart, Series};
use crate::corpus::{self, Corpus, Gazetteer, IngestOptions, IngestStats, LocationCode};
use crate::sbsnet::{self, Partition, PartitionKey, SbsParams};
use crate::sentiment::{self, io::ModelSidecar, Example, ModelShape, SentimentModel};
use crate::textprep::{build_vocab, URL_TOKEN, drop_non_english, FilterLists, Preprocessor, TokenSeq, Vocab};
use crate::topics::{self, LdaParams};

/// Corpus state shared by every analysis stage.
struct Prepared {
    corpus: Corpus,
    /// Per record: stemmed tokens without stopwords, query terms or the URL
    /// placeholder.
    tokens: Vec<TokenSeq>,
    vocab: Vocab,
    pre: Preprocessor,
}

pub(super) struct Context<'a> {
    cfg: &'a PipelineConfig,
    bundle: &'a Bundle,
    prep: Option<Prepared>,
    model: Option<(SentimentModel, Vocab)>,
}

#[derive(Serialize)]
struct IngestReport<'a> {
    total: usize,
    accepted: usize,
    rejected: &'a std::collections::BTreeMap<corpus::RejectReason, usize>,
    rejections: &'a [(usize, corpus::RejectReason)],
    non_english_dropped: usize,
    records: usize,
    labeled: usize,
    buckets: usize,
    vocab_size: usize,
}

fn week_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i}")).collect()
}

fn location_labels() -> Vec<String> {
    LocationCode::ALL.iter().map(|l| l.as_str().to_string()).collect()
}

impl<'a> Context<'a> {
    pub(super) fn new(cfg: &'a PipelineConfig, bundle: &'a Bundle) -> Self {
        Self { cfg, bundle, prep: None, model: None }
    }

    pub(super) fn run_stage(&mut self, stage: Stage) -> Result<(), PipelineError> {
        let fail = |message: String| PipelineError::Stage { stage, message };
        match stage {
            Stage::Ingest => self.ingest(),
            Stage::Volume => self.volume().map_err(fail),
            Stage::SentimentTrain => self.sentiment_train().map_err(fail),
            Stage::SentimentScore => self.sentiment_score().map_err(fail),
            Stage::Topics => self.topics().map_err(fail),
            Stage::Sbs => self.sbs().map_err(fail),
            Stage::Report => self.report().map_err(fail),
        }
    }

    fn prep(&self) -> &Prepared {
        self.prep.as_ref().expect("ingest runs first")
    }

    fn write(&self, rel: &str, bytes: impl AsRef<[u8]>) -> Result<(), String> {
        self.bundle.write(rel, bytes).map_err(|e| format!("{rel}: {e}"))
    }

    fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<(), String> {
        self.bundle.write_json(rel, value).map_err(|e| format!("{rel}: {e}"))
    }

    fn write_csv(&self, rel: &str, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(), String> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| format!("{rel}: {e}"))?;
        self.write(rel, buf)
    }

    fn ingest(&mut self) -> Result<(), PipelineError> {
        let cfg = self.cfg;
        let input = |e: String| PipelineError::Input(e);
        let gazetteer = match &cfg.gazetteer {
            Some(p) => Gazetteer::load(p).map_err(|e| input(e.to_string()))?,
            None => Gazetteer::bundled(),
        };
        let opts = IngestOptions { gazetteer, epoch_start: cfg.epoch, granularity: cfg.granularity };
        let (raw, stats) = corpus::ingest(&cfg.input, cfg.format, &opts).map_err(|e| input(e.to_string()))?;
        let filters = FilterLists::load(cfg.stopwords.as_deref(), cfg.query_terms.as_deref())
            .map_err(|e| input(format!("word lists: {e}")))?;
        let pre = Preprocessor::new(filters);

        let english: Vec<_> = raw.records().iter().filter(|r| drop_non_english(r)).cloned().collect();
        let non_english_dropped = raw.len() - english.len();
        let corpus = Corpus::new(cfg.epoch, cfg.granularity, english);
        if corpus.is_empty() {
            return Err(input("no English records survived ingest".into()));
        }
        let tokens: Vec<TokenSeq> = corpus
            .records()
            .iter()
            .map(|r| {
                pre.strip_query_terms(&pre.tokens(&r.text))
                    .iter()
                    .filter(|t| *t != URL_TOKEN)
                    .collect()
            })
            .collect();
        let vocab = build_vocab(&tokens, cfg.min_count).map_err(|e| input(e.to_string()))?;

        let stage_err = |message: String| PipelineError::Stage { stage: Stage::Ingest, message };
        self.write_ingest(&stats, non_english_dropped, &corpus, &vocab).map_err(stage_err)?;
        self.prep = Some(Prepared { corpus, tokens, vocab, pre });
        Ok(())
    }

    fn write_ingest(&self, stats: &IngestStats, dropped: usize, corpus: &Corpus, vocab: &Vocab) -> Result<(), String> {
        let report = IngestReport {
            total: stats.total,
            accepted: stats.accepted,
            rejected: &stats.rejected,
            rejections: &stats.rejections,
            non_english_dropped: dropped,
            records: corpus.len(),
            labeled: corpus.records().iter().filter(|r| r.label.is_some()).count(),
            buckets: corpus.bucket_count(),
            vocab_size: vocab.len(),
        };
        self.write_json("ingest/stats.json", &report)?;
        let mut buf = Vec::new();
        corpus.write_jsonl(&mut buf).map_err(|e| e.to_string())?;
        self.write("ingest/records.jsonl", buf)?;
        self.write_json("ingest/vocab.json", vocab)
    }

    fn volume(&mut self) -> Result<(), String> {
        let p = self.prep();
        let grid = analytics::volume_grid(&p.corpus);
        self.write_csv("volume/grid.csv", |b| grid.write_csv(b))?;
        let heat = Heatmap {
            title: "Records per location and week".into(),
            row_labels: location_labels(),
            col_labels: week_labels(grid.cols()),
            values: LocationCode::ALL
                .iter()
                .map(|&l| grid.row(l).iter().map(|&c| Some(c as f64)).collect())
                .collect(),
        };
        self.write("volume/heatmap.svg", heat.render().map_err(|e| e.to_string())?)?;

        let weekly: Vec<f64> = grid.col_sums().iter().map(|&c| c as f64).collect();
        let line = LineChart {
            title: "Records per week".into(),
            x_labels: week_labels(weekly.len()),
            series: vec![Series { label: "records".into(), values: weekly.iter().map(|&v| Some(v)).collect() }],
        };
        self.write("volume/weekly.svg", line.render().map_err(|e| e.to_string())?)?;

        let exclude = p.pre.filters().query_stems();
        let cloud = analytics::term_cloud(&p.tokens, &exclude, self.cfg.term_cloud_k);
        let mut csv = String::from("term,count\n");
        for (t, c) in &cloud {
            csv.push_str(&format!("{t},{c}\n"));
        }
        self.write("volume/term_cloud.csv", csv)?;
        if !cloud.is_empty() {
            let top: Vec<_> = cloud.iter().take(20).collect();
            let bar = BarChart {
                title: "Most frequent terms".into(),
                labels: top.iter().map(|(t, _)| t.clone()).collect(),
                values: top.iter().map(|(_, c)| Some(*c as f64)).collect(),
            };
            self.write("volume/term_cloud.svg", bar.render().map_err(|e| e.to_string())?)?;
        }

        if let Some(path) = &self.cfg.cases {
            let series = ExternalSeries::load(path, "cases").map_err(|e| format!("{}: {e}", path.display()))?;
            let (counts, cases) = series.aligned_with(&weekly);
            let corr = |m| correlate(&counts, &cases, m);
            let (pearson, spearman) = (corr(CorrelationMethod::Pearson), corr(CorrelationMethod::Spearman));
            let report = json!({
                "series": series.label,
                "aligned_buckets": counts.len(),
                "pearson": pearson.as_ref().ok(),
                "spearman": spearman.as_ref().ok(),
                "error": pearson.as_ref().err().or(spearman.as_ref().err()).map(|e| e.to_string()),
            });
            self.write_json("volume/correlation.json", &report)?;
        }
        Ok(())
    }

    fn sentiment_train(&mut self) -> Result<(), String> {
        let p = self.prep();
        let cfg = &self.cfg.sentiment;
        let shape = ModelShape::standard(p.vocab.len());
        let examples: Vec<Example> = p
            .corpus
            .records()
            .iter()
            .zip(&p.tokens)
            .filter_map(|(r, t)| r.label.map(|l| Example::new(t, &p.vocab, shape.pad_len, l)))
            .collect();
        if examples.is_empty() {
            return Err("no labeled records to train on".into());
        }
        let (train_set, val_set) = sentiment::split(examples, cfg.val_fraction, cfg.train.seed);
        let model = SentimentModel::initialized(shape.clone(), cfg.train.seed).map_err(|e| e.to_string())?;
        let outcome = sentiment::train(model, &train_set, &val_set, &cfg.train).map_err(|e| e.to_string())?;

        let (held_out, evaluated_on) = if val_set.is_empty() {
            (&train_set, "training")
        } else {
            (&val_set, "validation")
        };
        let scores = sentiment::score_examples(&outcome.model, held_out).map_err(|e| e.to_string())?;
        let scored: Vec<_> = scores.into_iter().zip(held_out.iter().map(|e| e.label)).collect();
        let metrics = sentiment::evaluate(&scored);

        let sidecar = ModelSidecar {
            format_version: sentiment::io::FORMAT_VERSION,
            shape,
            train: Some(cfg.train.clone()),
            best_epoch: Some(outcome.best_epoch),
        };
        std::fs::create_dir_all(self.bundle.path("sentiment")).map_err(|e| format!("sentiment/: {e}"))?;
        sentiment::io::save(
            &outcome.model,
            &sidecar,
            &self.bundle.path("sentiment/model.bin"),
            &self.bundle.path("sentiment/model.json"),
        )
        .map_err(|e| e.to_string())?;
        self.write_json("sentiment/vocab.json", &p.vocab)?;
        self.write_json(
            "sentiment/metrics.json",
            &json!({
                "evaluated_on": evaluated_on,
                "train_examples": train_set.len(),
                "validation_examples": val_set.len(),
                "best_epoch": outcome.best_epoch,
                "metrics": metrics,
                "epochs": outcome.log,
            }),
        )?;
        let vocab = p.vocab.clone();
        self.model = Some((outcome.model, vocab));
        Ok(())
    }

    fn load_model(dir: &Path) -> Result<(SentimentModel, Vocab), String> {
        let (model, _) =
            sentiment::io::load(&dir.join("model.bin"), &dir.join("model.json")).map_err(|e| e.to_string())?;
        let text = std::fs::read_to_string(dir.join("vocab.json")).map_err(|e| format!("vocab.json: {e}"))?;
        let vocab: Vocab = serde_json::from_str(&text).map_err(|e| format!("vocab.json: {e}"))?;
        if vocab.len() + 1 != model.shape.vocab_rows {
            return Err(format!(
                "vocab of {} entries does not fit a model with {} embedding rows",
                vocab.len(),
                model.shape.vocab_rows
            ));
        }
        Ok((model, vocab))
    }

    fn sentiment_score(&mut self) -> Result<(), String> {
        if let Some(dir) = &self.cfg.sentiment.model {
            self.model = Some(Self::load_model(dir)?);
        }
        let p = self.prep();
        let (model, vocab) = self.model.as_ref().ok_or("no sentiment model available")?;
        let examples: Vec<Example> = p
            .tokens
            .iter()
            .map(|t| Example::new(t, vocab, model.shape.pad_len, corpus::Label::Negative))
            .collect();
        let scores = sentiment::score_examples(model, &examples).map_err(|e| e.to_string())?;
        let labels: Vec<corpus::Label> = scores.iter().map(|&s| sentiment::classify(s)).collect();

        let mut csv = String::from("id,score,label\n");
        for ((r, s), l) in p.corpus.records().iter().zip(&scores).zip(&labels) {
            csv.push_str(&format!("{},{s:.6},{}\n", r.id, l.as_str()));
        }
        self.write("sentiment/scores.csv", csv)?;

        let mut next = labels.iter();
        let grids = analytics::sentiment_grid(&p.corpus, |_| *next.next().expect("one label per record"));
        self.write_csv("sentiment/positive.csv", |b| grids.positive.write_csv(b))?;
        self.write_csv("sentiment/total.csv", |b| grids.total.write_csv(b))?;
        self.write_csv("sentiment/ratio.csv", |b| grids.ratio.write_csv(b))?;
        let heat = Heatmap {
            title: "Positive vs total ratio".into(),
            row_labels: location_labels(),
            col_labels: week_labels(grids.ratio.cols()),
            values: LocationCode::ALL.iter().map(|&l| grids.ratio.row(l).to_vec()).collect(),
        };
        self.write("sentiment/ratio_heatmap.svg", heat.render().map_err(|e| e.to_string())?)?;
        let by_week = grids.ratio_by_bucket();
        let line = LineChart {
            title: "Positive vs total ratio per week".into(),
            x_labels: week_labels(by_week.len()),
            series: vec![Series { label: "ratio".into(), values: by_week }],
        };
        self.write("sentiment/ratio_weekly.svg", line.render().map_err(|e| e.to_string())?)?;
        Ok(())
    }

    fn weekly_docs(p: &Prepared) -> Vec<(u32, Vec<Vec<u32>>)> {
        let mut weeks: Vec<(u32, Vec<Vec<u32>>)> =
            (0..p.corpus.bucket_count() as u32).map(|w| (w, Vec::new())).collect();
        for (r, t) in p.corpus.records().iter().zip(&p.tokens) {
            weeks[r.bucket.index as usize].1.push(p.vocab.encode(t));
        }
        weeks
    }

    fn topics(&mut self) -> Result<(), String> {
        let p = self.prep();
        let t = &self.cfg.topics;
        let mut params = LdaParams::new(t.k, t.iterations, t.seed);
        params.beta = t.beta;
        if let Some(a) = t.alpha {
            params.alpha = a;
        }
        let chain = topics::chain(&Self::weekly_docs(p), p.vocab.len(), &params).map_err(|e| e.to_string())?;
        self.write_json("topics/chain.json", &topics::export_chain(&chain, &p.vocab, t.top_k))?;
        let shares = topics::topic_share_series(&chain);
        self.write_csv("topics/shares.csv", |b| topics::write_share_csv(&shares, b))?;
        let line = LineChart {
            title: "Topic share per week".into(),
            x_labels: shares.iter().map(|r| format!("w{}", r.week)).collect(),
            series: (0..t.k)
                .map(|k| Series { label: format!("topic {k}"), values: shares.iter().map(|r| Some(r.shares[k])).collect() })
                .collect(),
        };
        self.write("topics/shares.svg", line.render().map_err(|e| e.to_string())?)?;
        Ok(())
    }

    fn sbs(&mut self) -> Result<(), String> {
        let p = self.prep();
        let cfg = &self.cfg.sbs;
        let mut watchlist: Vec<String> = Vec::new();
        for w in &cfg.watchlist {
            let toks = p.pre.tokens(w);
            let word = match toks.tokens() {
                [one] => one.clone(),
                _ => w.to_lowercase(),
            };
            if !watchlist.contains(&word) {
                watchlist.push(word);
            }
        }

        let weeks = Self::weekly_docs(p);
        let mut partitions: Vec<Partition> = weeks
            .iter()
            .map(|(w, docs)| Partition { key: PartitionKey { week: *w, location: None }, docs: docs.clone() })
            .collect();
        if cfg.by_location {
            let mut by_loc: std::collections::BTreeMap<(u32, LocationCode), Vec<Vec<u32>>> = Default::default();
            for (r, t) in p.corpus.records().iter().zip(&p.tokens) {
                by_loc.entry((r.bucket.index, r.location)).or_default().push(p.vocab.encode(t));
            }
            partitions.extend(
                by_loc
                    .into_iter()
                    .map(|((week, loc), docs)| Partition { key: PartitionKey { week, location: Some(loc) }, docs }),
            );
        }
        let params = SbsParams { window: cfg.window, min_edge_weight: cfg.min_edge_weight };
        let series = sbsnet::sbs_series(&partitions, &p.vocab, &watchlist, params).map_err(|e| e.to_string())?;
        self.write_csv("sbs/series.csv", |b| series.write_csv(b))?;

        let lines: Vec<Series> = watchlist
            .iter()
            .map(|w| Series {
                label: w.clone(),
                values: series
                    .word_series(w)
                    .expect("word on watchlist")
                    .into_iter()
                    .filter(|(k, _)| k.location.is_none())
                    .map(|(_, v)| v)
                    .collect(),
            })
            .collect();
        let line = LineChart { title: "Semantic Brand Score per week".into(), x_labels: week_labels(weeks.len()), series: lines };
        match line.render() {
            Ok(svg) => self.write("sbs/weekly.svg", svg)?,
            // no watchlist word made it into any network; the CSV still records that
            Err(crate::chart::ChartError::NothingToPlot) => {}
            Err(e) => return Err(e.to_string()),
        }

        if cfg.by_location {
            let word = &watchlist[0];
            let mut grid: Grid<Option<f64>> = Grid::filled(weeks.len(), None);
            for (key, v) in series.word_series(word).expect("word on watchlist") {
                if let Some(loc) = key.location {
                    *grid.get_mut(loc, key.week as usize) = v;
                }
            }
            let heat = Heatmap {
                title: format!("Semantic Brand Score of `{word}`"),
                row_labels: location_labels(),
                col_labels: week_labels(weeks.len()),
                values: LocationCode::ALL.iter().map(|&l| grid.row(l).to_vec()).collect(),
            };
            if let Ok(svg) = heat.render() {
                self.write("sbs/location_heatmap.svg", svg)?;
            }
        }
        Ok(())
    }

    fn read_json(&self, rel: &str) -> Option<Value> {
        let text = std::fs::read_to_string(self.bundle.path(rel)).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// Collects headline numbers from whichever stage outputs are present.
    fn report(&mut self) -> Result<(), String> {
        let mut summary = serde_json::Map::new();
        if let Some(stats) = self.read_json("ingest/stats.json") {
            let pick = |k: &str| stats.get(k).cloned().unwrap_or(Value::Null);
            summary.insert(
                "ingest".into(),
                json!({
                    "total": pick("total"),
                    "accepted": pick("accepted"),
                    "rejected": pick("rejected"),
                    "non_english_dropped": pick("non_english_dropped"),
                    "records": pick("records"),
                    "vocab_size": pick("vocab_size"),
                }),
            );
        }
        if let Some(c) = self.read_json("volume/correlation.json") {
            summary.insert("correlation".into(), c);
        }
        if let Ok(text) = std::fs::read_to_string(self.bundle.path("volume/term_cloud.csv")) {
            let top: Vec<&str> = text.lines().skip(1).take(10).filter_map(|l| l.split(',').next()).collect();
            summary.insert("top_terms".into(), json!(top));
        }
        if let Some(m) = self.read_json("sentiment/metrics.json") {
            summary.insert("sentiment".into(), m.get("metrics").cloned().unwrap_or(Value::Null));
        }
        if let Some(chain) = self.read_json("topics/chain.json") {
            let slices = chain.get("slices").and_then(Value::as_array).cloned().unwrap_or_default();
            let weeks: Vec<Value> = slices
                .iter()
                .map(|s| {
                    let topics: Vec<Vec<Value>> = s["topics"]
                        .as_array()
                        .map(|ts| {
                            ts.iter()
                                .map(|t| t["terms"].as_array().map(|a| a.iter().take(5).map(|p| p[0].clone()).collect()).unwrap_or_default())
                                .collect()
                        })
                        .unwrap_or_default();
                    json!({ "week": s["week"], "topics": topics })
                })
                .collect();
            summary.insert("topics".into(), json!(weeks));
        }
        if let Ok(text) = std::fs::read_to_string(self.bundle.path("sbs/series.csv")) {
            // strongest watchlist word per week-level partition
            let mut best: std::collections::BTreeMap<String, (String, f64)> = Default::default();
            for line in text.lines().skip(1) {
                let f: Vec<&str> = line.split(',').collect();
                let (Some(part), Some(word), Some(Ok(v))) = (f.first(), f.get(1), f.get(8).map(|s| s.parse::<f64>())) else {
                    continue;
                };
                if part.contains(':') {
                    continue;
                }
                let e = best.entry(part.to_string()).or_insert((word.to_string(), v));
                if v > e.1 {
                    *e = (word.to_string(), v);
                }
            }
            let leaders: BTreeSet<(u32, String)> = best
                .into_iter()
                .filter_map(|(k, (w, _))| k.trim_start_matches('w').parse().ok().map(|n| (n, w)))
                .collect();
            summary.insert(
                "sbs_leaders".into(),
                json!(leaders.into_iter().map(|(w, word)| json!({"week": w, "word": word})).collect::<Vec<_>>()),
            );
        }
        self.write_json("report.json", &Value::Object(summary))
    }
}
