//! Checkpoints: a text manifest (config, seed, epoch, metrics, stats) next
//! to the flat parameter vector in an `STM1` container.

use super::params::ModelParams;
use super::ModelConfig;
use crate::config::{
    floats_from_string, floats_to_string, model_config_from_kv, model_config_to_kv, KvMap,
};
use crate::data::NormStats;
use crate::error::{Error, Result};
use crate::io;
use crate::tensor::DenseMatrix;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub stats: NormStats,
    pub params_flat: Vec<f64>,
    pub epoch: usize,
    pub best_epoch: usize,
    pub val_mae: f64,
    pub val_rmse: f64,
    pub val_mape: Option<f64>,
}

impl Checkpoint {
    /// Rebuild the structured parameters from the flat vector.
    pub fn params(&self) -> Result<ModelParams> {
        let mut p = ModelParams::zeros(&self.config);
        if p.total_count() != self.params_flat.len() {
            return Err(Error::usage(format!(
                "checkpoint holds {} parameters but the config implies {}",
                self.params_flat.len(),
                p.total_count()
            )));
        }
        p.copy_from_flat(&self.params_flat);
        Ok(p)
    }

    /// Write `<stem>.manifest.txt` and `<stem>.params.stm1` in `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let params_name = format!("{stem}.params.stm1");
        let matrix = DenseMatrix::from_vec(self.params_flat.len(), 1, self.params_flat.clone());
        io::write_matrix(&matrix, &dir.join(&params_name))?;

        let mut kv = KvMap::default();
        model_config_to_kv(&self.config, &mut kv);
        kv.set("checkpoint.params_file", &params_name);
        kv.set("checkpoint.param_count", self.params_flat.len());
        kv.set("checkpoint.epoch", self.epoch);
        kv.set("checkpoint.best_epoch", self.best_epoch);
        kv.set("checkpoint.val_mae", self.val_mae);
        kv.set("checkpoint.val_rmse", self.val_rmse);
        if let Some(m) = self.val_mape {
            kv.set("checkpoint.val_mape", m);
        }
        kv.set("stats.mean", floats_to_string(&self.stats.mean));
        kv.set("stats.std", floats_to_string(&self.stats.std));
        kv.save(&dir.join(format!("{stem}.manifest.txt")))?;
        Ok(())
    }

    pub fn load(manifest_path: &Path) -> Result<Checkpoint> {
        let kv = KvMap::load(manifest_path)?;
        let config = model_config_from_kv(&kv, ModelConfig::defaults(1))?;
        config.validate()?;

        let params_file = kv
            .get("checkpoint.params_file")
            .ok_or_else(|| Error::usage("manifest lacks checkpoint.params_file".to_string()))?;
        let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
        let matrix = io::read_matrix(&dir.join(params_file))?;
        let params_flat = matrix.data().to_vec();

        let mean = floats_from_string(
            kv.get("stats.mean")
                .ok_or_else(|| Error::usage("manifest lacks stats.mean".to_string()))?,
        )?;
        let std = floats_from_string(
            kv.get("stats.std")
                .ok_or_else(|| Error::usage("manifest lacks stats.std".to_string()))?,
        )?;
        if mean.len() != config.n_nodes || std.len() != config.n_nodes {
            return Err(Error::usage("stats length does not match node count".to_string()));
        }

        Ok(Checkpoint {
            config,
            stats: NormStats { mean, std },
            params_flat,
            epoch: kv.take_parsed("checkpoint.epoch")?.unwrap_or(0),
            best_epoch: kv.take_parsed("checkpoint.best_epoch")?.unwrap_or(0),
            val_mae: kv.take_parsed("checkpoint.val_mae")?.unwrap_or(f64::NAN),
            val_rmse: kv.take_parsed("checkpoint.val_rmse")?.unwrap_or(f64::NAN),
            val_mape: kv.take_parsed("checkpoint.val_mape")?,
        })
    }
}
