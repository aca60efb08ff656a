//! Reference allocators: weight-proportional split and multinomial regression.

use crate::datagen::GameDataset;
use crate::error::{Error, Result};
use crate::games::{SolutionVector, WeightedVotingGame};
use crate::matrix::Matrix;
use crate::neural::{self, MlpArchitecture, ModelFile, PayoffModel, TrainConfig, TrainOutcome};

/// `p_j = w_j / sum(w)`, ignoring the quota.
pub fn weight_proportional(game: &WeightedVotingGame) -> Result<SolutionVector> {
    let total = game.total_weight();
    if !(total > 0.0) {
        return Err(Error::DegenerateGame("all weights are zero".into()));
    }
    Ok(SolutionVector::new(
        game.weights().iter().map(|w| w / total).collect(),
    ))
}

/// One affine layer with a softmax output.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearPayoffModel {
    model: PayoffModel,
}

impl LinearPayoffModel {
    pub fn architecture(n: usize, epsilon: bool) -> MlpArchitecture {
        MlpArchitecture::payoff(n, n, epsilon)
            .with_hidden(Vec::new())
            .with_dropout(0.0)
    }

    pub fn from_model(model: PayoffModel) -> Result<Self> {
        if !model.architecture().hidden.is_empty() {
            return Err(Error::Config("a linear payoff model has no hidden layers".into()));
        }
        Ok(LinearPayoffModel { model })
    }

    /// `n x n` weights (inputs by outputs).
    pub fn weights(&self) -> Matrix {
        self.model.layer(0).0
    }

    pub fn bias(&self) -> Vec<f64> {
        self.model.layer(0).1
    }

    pub fn model(&self) -> &PayoffModel {
        &self.model
    }

    pub fn into_model(self) -> PayoffModel {
        self.model
    }

    pub fn predict(&self, game: &WeightedVotingGame) -> Result<SolutionVector> {
        neural::predict_payoffs(&self.model, game)
    }

    pub fn to_file(&self) -> ModelFile {
        self.model.to_file()
    }
}

/// Fits the linear model with the same split, optimizer and early stopping as [`neural::train`].
pub fn train_multinomial(ds: &GameDataset, cfg: &TrainConfig) -> Result<(LinearPayoffModel, TrainOutcome)> {
    if ds.meta.layout.is_variable() {
        return Err(Error::Config(
            "multinomial baseline needs a fixed-size dataset".into(),
        ));
    }
    let n = ds.meta.layout.width();
    let arch = LinearPayoffModel::architecture(n, ds.concept().has_epsilon());
    let outcome = neural::train(ds, &arch, cfg)?;
    Ok((LinearPayoffModel::from_model(outcome.model.clone())?, outcome))
}
