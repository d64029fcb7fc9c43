use std::collections::HashMap;
use std::sync::Mutex;

use crate::baselines::{MlTable, MwpmDecoder};
use crate::error::{Error, Result};
use crate::model::Hqmt;
use crate::stabilizer::{CodeLayout, LogicalClass, Syndrome};

/// Classes predicted for a batch, plus how many used an approximate path.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecodeBatch {
    pub classes: Vec<LogicalClass>,
    pub fallbacks: usize,
}

/// Anything that maps syndromes to logical classes. Implementations are pure
/// functions of the syndrome.
pub trait Decoder: Sync {
    fn id(&self) -> String;

    fn decode_batch(&self, layout: &CodeLayout, syndromes: &[Syndrome]) -> Result<DecodeBatch>;
}

impl Decoder for MlTable {
    fn id(&self) -> String {
        "ml".into()
    }

    fn decode_batch(&self, layout: &CodeLayout, syndromes: &[Syndrome]) -> Result<DecodeBatch> {
        if layout.distance() != 3 {
            return Err(Error::ExhaustiveTooLarge(layout.distance()));
        }
        Ok(DecodeBatch {
            classes: syndromes.iter().map(|s| self.best(s)).collect(),
            fallbacks: 0,
        })
    }
}

impl Decoder for MwpmDecoder {
    fn id(&self) -> String {
        "mwpm".into()
    }

    fn decode_batch(&self, layout: &CodeLayout, syndromes: &[Syndrome]) -> Result<DecodeBatch> {
        let mut out = DecodeBatch::default();
        for s in syndromes {
            let (c, fallback) = self.decode(layout, s)?;
            out.classes.push(c);
            out.fallbacks += fallback as usize;
        }
        Ok(out)
    }
}

/// Lookup decoder over every syndrome of a small code, indexed by
/// [`Syndrome::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct TableDecoder {
    pub name: String,
    pub distance: usize,
    pub table: Vec<LogicalClass>,
}

impl TableDecoder {
    /// Always predicts `class`.
    pub fn constant(layout: &CodeLayout, class: LogicalClass) -> Self {
        Self {
            name: format!("constant-{class}"),
            distance: layout.distance(),
            table: vec![class; 1 << (2 * layout.num_checks())],
        }
    }
}

impl Decoder for TableDecoder {
    fn id(&self) -> String {
        self.name.clone()
    }

    fn decode_batch(&self, layout: &CodeLayout, syndromes: &[Syndrome]) -> Result<DecodeBatch> {
        if layout.distance() != self.distance {
            return Err(Error::DistanceMismatch {
                checkpoint: self.distance,
                requested: layout.distance(),
            });
        }
        Ok(DecodeBatch {
            classes: syndromes.iter().map(|s| self.table[s.index() as usize]).collect(),
            fallbacks: 0,
        })
    }
}

/// Runs `decoder` on every syndrome of the distance-3 code.
pub fn tabulate(decoder: &dyn Decoder, layout: &CodeLayout) -> Result<TableDecoder> {
    if layout.distance() != 3 {
        return Err(Error::ExhaustiveTooLarge(layout.distance()));
    }
    let m = layout.num_checks();
    let all: Vec<Syndrome> = (0..1u64 << (2 * m)).map(|i| Syndrome::from_index(i, m)).collect();
    Ok(TableDecoder {
        name: decoder.id(),
        distance: 3,
        table: decoder.decode_batch(layout, &all)?.classes,
    })
}

/// Entries kept in the [`HqmtDecoder`] syndrome cache before it is reset.
const CACHE_LIMIT: usize = 1 << 22;
/// Forward-pass batch size during evaluation.
const EVAL_BATCH: usize = 512;

/// Trained model as a decoder. Distinct syndromes are evaluated once and
/// memoized.
#[derive(Debug)]
pub struct HqmtDecoder<'a> {
    model: &'a Hqmt,
    cache: Mutex<HashMap<Vec<u64>, LogicalClass>>,
}

impl<'a> HqmtDecoder<'a> {
    pub fn new(model: &'a Hqmt) -> Self {
        Self {
            model,
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl Decoder for HqmtDecoder<'_> {
    fn id(&self) -> String {
        "hqmt".into()
    }

    fn decode_batch(&self, layout: &CodeLayout, syndromes: &[Syndrome]) -> Result<DecodeBatch> {
        self.model.check_layout(layout)?;
        let keys: Vec<Vec<u64>> = syndromes.iter().map(|s| s.concat().words().to_vec()).collect();
        let mut missing: Vec<usize> = Vec::new();
        {
            let cache = self.cache.lock().expect("cache lock");
            let mut seen = HashMap::new();
            for (i, k) in keys.iter().enumerate() {
                if !cache.contains_key(k) && seen.insert(k, i).is_none() {
                    missing.push(i);
                }
            }
        }
        let todo: Vec<Syndrome> = missing.iter().map(|&i| syndromes[i].clone()).collect();
        let predicted = self.model.predict_batch(layout, &todo, EVAL_BATCH)?;
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() + predicted.len() > CACHE_LIMIT {
            cache.clear();
        }
        let mut local: HashMap<&Vec<u64>, LogicalClass> = HashMap::new();
        for (&i, c) in missing.iter().zip(predicted) {
            local.insert(&keys[i], c);
            cache.insert(keys[i].clone(), c);
        }
        let classes = keys
            .iter()
            .map(|k| local.get(k).or_else(|| cache.get(k)).copied())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Inconsistent("syndrome missing from decoder cache".into()))?;
        Ok(DecodeBatch {
            classes,
            fallbacks: 0,
        })
    }
}
