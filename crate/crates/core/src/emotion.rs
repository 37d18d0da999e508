//! Discretization of valence/arousal/dominance into emotion labels.

use crate::model::Emotion;

/// Half-width of the neutral band around the center of valence/arousal.
pub const NEUTRAL_BAND: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("affect values must lie in [0, 1]")]
pub struct EmotionError;

/// Maps affect values in `[0, 1]` to one of five labels.
///
/// Inside the neutral band the label is `neutral`; otherwise the
/// valence/arousal quadrant decides, with 0.5 counting as high.
/// Dominance is range-checked but never changes the label.
pub fn discretize_emotion(valence: f64, arousal: f64, dominance: f64) -> Result<Emotion, EmotionError> {
    let in_range = |x: f64| (0.0..=1.0).contains(&x);
    if !(in_range(valence) && in_range(arousal) && in_range(dominance)) {
        return Err(EmotionError);
    }
    let dv = valence - 0.5;
    let da = arousal - 0.5;
    if libm::fabs(dv).max(libm::fabs(da)) <= NEUTRAL_BAND {
        return Ok(Emotion::Neutral);
    }
    Ok(match (dv >= 0.0, da >= 0.0) {
        (true, true) => Emotion::Excited,
        (true, false) => Emotion::Content,
        (false, true) => Emotion::Angry,
        (false, false) => Emotion::Sad,
    })
}
