//! Symbolic feature types and bundle validation.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::emotion::discretize_emotion;
use crate::timefmt::secs;

/// Version stamped into every canonical feature document.
pub const SCHEMA_VERSION: u64 = 1;

/// Event tags may end this far past the clip duration.
pub const EVENT_END_TOLERANCE_S: f64 = 0.05;

/// Velocity recorded when the source does not provide one.
pub const DEFAULT_VELOCITY: u8 = 64;

/// One of the six symbolic feature layers, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    Events,
    Transcript,
    Emotion,
    Notes,
    Chords,
    MusicTags,
}

impl Layer {
    pub const ALL: [Layer; 6] = [
        Layer::Events,
        Layer::Transcript,
        Layer::Emotion,
        Layer::Notes,
        Layer::Chords,
        Layer::MusicTags,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Layer::Events => "events",
            Layer::Transcript => "transcript",
            Layer::Emotion => "emotion",
            Layer::Notes => "notes",
            Layer::Chords => "chords",
            Layer::MusicTags => "music_tags",
        }
    }

    /// Section heading used in rendered prompts.
    pub fn title(self) -> &'static str {
        match self {
            Layer::Events => "SOUND EVENTS",
            Layer::Transcript => "TRANSCRIPT",
            Layer::Emotion => "EMOTION",
            Layer::Notes => "NOTES",
            Layer::Chords => "CHORDS",
            Layer::MusicTags => "MUSIC TAGS",
        }
    }

    pub fn from_name(name: &str) -> Option<Layer> {
        Layer::ALL.into_iter().find(|l| l.name() == name)
    }

    pub fn from_title(title: &str) -> Option<Layer> {
        Layer::ALL.into_iter().find(|l| l.title() == title)
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Layer {
    type Err = UnknownLayer;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Layer::from_name(s).ok_or(UnknownLayer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("unknown feature layer")]
pub struct UnknownLayer;

/// A set of layers. Iterates in canonical layer order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct LayerSet(u8);

impl LayerSet {
    pub const fn empty() -> Self {
        LayerSet(0)
    }

    pub fn all() -> Self {
        Layer::ALL.into_iter().collect()
    }

    pub fn contains(self, layer: Layer) -> bool {
        self.0 & layer.bit() != 0
    }

    pub fn insert(&mut self, layer: Layer) {
        self.0 |= layer.bit();
    }

    pub fn remove(&mut self, layer: Layer) {
        self.0 &= !layer.bit();
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_subset(self, other: LayerSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn intersection(self, other: LayerSet) -> LayerSet {
        LayerSet(self.0 & other.0)
    }

    pub fn union(self, other: LayerSet) -> LayerSet {
        LayerSet(self.0 | other.0)
    }

    pub fn difference(self, other: LayerSet) -> LayerSet {
        LayerSet(self.0 & !other.0)
    }

    pub fn iter(self) -> impl Iterator<Item = Layer> {
        Layer::ALL.into_iter().filter(move |l| self.contains(*l))
    }
}

impl FromIterator<Layer> for LayerSet {
    fn from_iter<I: IntoIterator<Item = Layer>>(iter: I) -> Self {
        let mut set = LayerSet::empty();
        for layer in iter {
            set.insert(layer);
        }
        set
    }
}

impl fmt::Debug for LayerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl Serialize for LayerSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for LayerSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Vec::<Layer>::deserialize(d)?.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipMetadata {
    pub clip_id: String,
    #[serde(with = "secs")]
    pub duration_s: f64,
    /// Zero when only precomputed features exist for the clip.
    #[serde(default)]
    pub sample_rate_hz: u32,
    #[serde(default)]
    pub source_path: Option<String>,
}

impl ClipMetadata {
    pub fn new(clip_id: impl Into<String>, duration_s: f64) -> Self {
        ClipMetadata {
            clip_id: clip_id.into(),
            duration_s,
            sample_rate_hz: 0,
            source_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTag {
    pub label: String,
    #[serde(with = "secs")]
    pub start_s: f64,
    #[serde(with = "secs")]
    pub end_s: f64,
    pub confidence: f64,
}

impl EventTag {
    pub fn new(label: impl Into<String>, start_s: f64, end_s: f64, confidence: f64) -> Self {
        EventTag {
            label: label.into(),
            start_s,
            end_s,
            confidence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptSegment {
    pub text: String,
    #[serde(with = "secs")]
    pub start_s: f64,
    #[serde(with = "secs")]
    pub end_s: f64,
    #[serde(default)]
    pub speaker: Option<String>,
}

/// Categorical emotion derived from valence and arousal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Neutral,
    Excited,
    Content,
    Angry,
    Sad,
}

impl Emotion {
    pub fn as_str(self) -> &'static str {
        match self {
            Emotion::Neutral => "neutral",
            Emotion::Excited => "excited",
            Emotion::Content => "content",
            Emotion::Angry => "angry",
            Emotion::Sad => "sad",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmotionLabel {
    pub valence: f64,
    pub arousal: f64,
    pub dominance: f64,
    pub label: Emotion,
}

impl EmotionLabel {
    /// Builds the label from raw affect values.
    pub fn from_vad(
        valence: f64,
        arousal: f64,
        dominance: f64,
    ) -> Result<Self, crate::emotion::EmotionError> {
        Ok(EmotionLabel {
            valence,
            arousal,
            dominance,
            label: discretize_emotion(valence, arousal, dominance)?,
        })
    }
}

impl<'de> Deserialize<'de> for EmotionLabel {
    /// A missing `label` is derived from the affect values.
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            valence: f64,
            arousal: f64,
            dominance: f64,
            #[serde(default)]
            label: Option<Emotion>,
        }
        let raw = Raw::deserialize(d)?;
        let label = match raw.label {
            Some(label) => label,
            None => discretize_emotion(raw.valence, raw.arousal, raw.dominance)
                .map_err(serde::de::Error::custom)?,
        };
        Ok(EmotionLabel {
            valence: raw.valence,
            arousal: raw.arousal,
            dominance: raw.dominance,
            label,
        })
    }
}

fn default_velocity() -> u8 {
    DEFAULT_VELOCITY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteEvent {
    pub midi_pitch: u8,
    #[serde(with = "secs")]
    pub onset_s: f64,
    #[serde(with = "secs")]
    pub offset_s: f64,
    pub instrument: String,
    #[serde(default = "default_velocity")]
    pub velocity: u8,
}

pub const PITCH_NAMES: [&str; 12] = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

/// Scientific pitch name of a MIDI note number, e.g. 69 -> `A4`.
pub fn midi_note_name(midi: u8) -> String {
    let octave = midi as i32 / 12 - 1;
    alloc::format!("{}{}", PITCH_NAMES[midi as usize % 12], octave)
}

/// Major/minor triad or no-chord.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChordLabel {
    NoChord,
    Major(u8),
    Minor(u8),
}

impl ChordLabel {
    /// All 24 triads, majors first, each quality ordered by root from C.
    pub fn triads() -> impl Iterator<Item = ChordLabel> {
        (0..12u8)
            .map(ChordLabel::Major)
            .chain((0..12u8).map(ChordLabel::Minor))
    }

    pub fn root(self) -> Option<u8> {
        match self {
            ChordLabel::NoChord => None,
            ChordLabel::Major(r) | ChordLabel::Minor(r) => Some(r),
        }
    }

    /// Same quality with the root moved up by `semitones`.
    pub fn transpose(self, semitones: u8) -> ChordLabel {
        match self {
            ChordLabel::NoChord => ChordLabel::NoChord,
            ChordLabel::Major(r) => ChordLabel::Major((r + semitones) % 12),
            ChordLabel::Minor(r) => ChordLabel::Minor((r + semitones) % 12),
        }
    }

    /// Pitch classes of the triad; empty for no-chord.
    pub fn pitch_classes(self) -> Option<[u8; 3]> {
        match self {
            ChordLabel::NoChord => None,
            ChordLabel::Major(r) => Some([r, (r + 4) % 12, (r + 7) % 12]),
            ChordLabel::Minor(r) => Some([r, (r + 3) % 12, (r + 7) % 12]),
        }
    }
}

impl fmt::Display for ChordLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChordLabel::NoChord => f.write_str("N"),
            ChordLabel::Major(r) => write!(f, "{}:maj", PITCH_NAMES[*r as usize % 12]),
            ChordLabel::Minor(r) => write!(f, "{}:min", PITCH_NAMES[*r as usize % 12]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid chord symbol {0:?}")]
pub struct InvalidChordSymbol(pub String);

impl FromStr for ChordLabel {
    type Err = InvalidChordSymbol;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "N" {
            return Ok(ChordLabel::NoChord);
        }
        let bad = || InvalidChordSymbol(s.into());
        let (root, quality) = s.split_once(':').ok_or_else(bad)?;
        let root = PITCH_NAMES.iter().position(|n| *n == root).ok_or_else(bad)? as u8;
        match quality {
            "maj" => Ok(ChordLabel::Major(root)),
            "min" => Ok(ChordLabel::Minor(root)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for ChordLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ChordLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChordSegment {
    pub symbol: ChordLabel,
    #[serde(with = "secs")]
    pub start_s: f64,
    #[serde(with = "secs")]
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MusicTag {
    pub label: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractionStatus {
    Ok,
    Failed,
}

/// Which extractor produced a layer, and whether it succeeded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub extractor: String,
    pub version: String,
    #[serde(default = "ok_status")]
    pub status: ExtractionStatus,
    #[serde(default)]
    pub error: Option<String>,
}

fn ok_status() -> ExtractionStatus {
    ExtractionStatus::Ok
}

impl ProvenanceEntry {
    pub fn ok(extractor: impl Into<String>, version: impl Into<String>) -> Self {
        ProvenanceEntry {
            extractor: extractor.into(),
            version: version.into(),
            status: ExtractionStatus::Ok,
            error: None,
        }
    }

    pub fn failed(
        extractor: impl Into<String>,
        version: impl Into<String>,
        error: impl Into<String>,
    ) -> Self {
        ProvenanceEntry {
            extractor: extractor.into(),
            version: version.into(),
            status: ExtractionStatus::Failed,
            error: Some(error.into()),
        }
    }
}

/// All symbolic features of one clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBundle {
    pub metadata: ClipMetadata,
    #[serde(default)]
    pub events: Vec<EventTag>,
    #[serde(default)]
    pub transcript: Vec<TranscriptSegment>,
    #[serde(default)]
    pub emotion: Option<EmotionLabel>,
    #[serde(default)]
    pub notes: Vec<NoteEvent>,
    #[serde(default)]
    pub chords: Vec<ChordSegment>,
    #[serde(default)]
    pub music_tags: Vec<MusicTag>,
    #[serde(default)]
    pub extractor_provenance: BTreeMap<Layer, ProvenanceEntry>,
}

impl FeatureBundle {
    pub fn new(metadata: ClipMetadata) -> Self {
        FeatureBundle {
            metadata,
            events: Vec::new(),
            transcript: Vec::new(),
            emotion: None,
            notes: Vec::new(),
            chords: Vec::new(),
            music_tags: Vec::new(),
            extractor_provenance: BTreeMap::new(),
        }
    }

    pub fn layer_len(&self, layer: Layer) -> usize {
        match layer {
            Layer::Events => self.events.len(),
            Layer::Transcript => self.transcript.len(),
            Layer::Emotion => self.emotion.is_some() as usize,
            Layer::Notes => self.notes.len(),
            Layer::Chords => self.chords.len(),
            Layer::MusicTags => self.music_tags.len(),
        }
    }

    /// Layers holding at least one feature.
    pub fn nonempty_layers(&self) -> LayerSet {
        Layer::ALL
            .into_iter()
            .filter(|l| self.layer_len(*l) > 0)
            .collect()
    }

    pub fn clear_layer(&mut self, layer: Layer) {
        match layer {
            Layer::Events => self.events.clear(),
            Layer::Transcript => self.transcript.clear(),
            Layer::Emotion => self.emotion = None,
            Layer::Notes => self.notes.clear(),
            Layer::Chords => self.chords.clear(),
            Layer::MusicTags => self.music_tags.clear(),
        }
    }

    /// Moves one layer's content from `other` into `self`, replacing it.
    pub fn take_layer_from(&mut self, layer: Layer, other: &mut FeatureBundle) {
        match layer {
            Layer::Events => self.events = core::mem::take(&mut other.events),
            Layer::Transcript => self.transcript = core::mem::take(&mut other.transcript),
            Layer::Emotion => self.emotion = other.emotion.take(),
            Layer::Notes => self.notes = core::mem::take(&mut other.notes),
            Layer::Chords => self.chords = core::mem::take(&mut other.chords),
            Layer::MusicTags => self.music_tags = core::mem::take(&mut other.music_tags),
        }
    }

    /// Keeps only the layers in `keep`; metadata and provenance are untouched.
    pub fn retain_layers(&mut self, keep: LayerSet) {
        for layer in Layer::ALL {
            if !keep.contains(layer) {
                self.clear_layer(layer);
            }
        }
    }

    /// Rounds every timestamp to the millisecond grid of the wire format.
    pub fn quantize_timestamps(&mut self) {
        let q = crate::timefmt::quantize_seconds;
        self.metadata.duration_s = q(self.metadata.duration_s);
        for e in &mut self.events {
            (e.start_s, e.end_s) = (q(e.start_s), q(e.end_s));
        }
        for t in &mut self.transcript {
            (t.start_s, t.end_s) = (q(t.start_s), q(t.end_s));
        }
        for n in &mut self.notes {
            (n.onset_s, n.offset_s) = (q(n.onset_s), q(n.offset_s));
        }
        for c in &mut self.chords {
            (c.start_s, c.end_s) = (q(c.start_s), q(c.end_s));
        }
    }

    /// Sorts every list into canonical order.
    pub fn canonicalize(&mut self) {
        self.events.sort_by(cmp_event);
        self.transcript.sort_by(cmp_transcript);
        self.notes.sort_by(cmp_note);
        self.chords.sort_by(cmp_chord);
        self.music_tags.sort_by(cmp_music_tag);
    }
}

pub(crate) fn cmp_event(a: &EventTag, b: &EventTag) -> Ordering {
    a.start_s
        .total_cmp(&b.start_s)
        .then(a.end_s.total_cmp(&b.end_s))
        .then_with(|| a.label.cmp(&b.label))
        .then(a.confidence.total_cmp(&b.confidence))
}

pub(crate) fn cmp_transcript(a: &TranscriptSegment, b: &TranscriptSegment) -> Ordering {
    a.start_s
        .total_cmp(&b.start_s)
        .then(a.end_s.total_cmp(&b.end_s))
        .then_with(|| a.text.cmp(&b.text))
        .then_with(|| a.speaker.cmp(&b.speaker))
}

pub(crate) fn cmp_note(a: &NoteEvent, b: &NoteEvent) -> Ordering {
    a.onset_s
        .total_cmp(&b.onset_s)
        .then(a.offset_s.total_cmp(&b.offset_s))
        .then(a.midi_pitch.cmp(&b.midi_pitch))
        .then_with(|| a.instrument.cmp(&b.instrument))
        .then(a.velocity.cmp(&b.velocity))
}

pub(crate) fn cmp_chord(a: &ChordSegment, b: &ChordSegment) -> Ordering {
    a.start_s
        .total_cmp(&b.start_s)
        .then(a.end_s.total_cmp(&b.end_s))
        .then(a.symbol.cmp(&b.symbol))
}

pub(crate) fn cmp_music_tag(a: &MusicTag, b: &MusicTag) -> Ordering {
    a.label
        .cmp(&b.label)
        .then(a.confidence.total_cmp(&b.confidence))
}

/// One broken invariant: a stable code plus the offending element index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub code: &'static str,
    pub index: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, code: &str) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    fn push(&mut self, code: &'static str, index: Option<usize>) {
        self.violations.push(Violation { code, index });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match v.index {
                Some(idx) => write!(f, "{}[{}]", v.code, idx)?,
                None => f.write_str(v.code)?,
            }
        }
        Ok(())
    }
}

fn unit_interval(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

fn check_sorted<T>(
    items: &[T],
    cmp: impl Fn(&T, &T) -> Ordering,
    code: &'static str,
    report: &mut ValidationReport,
) {
    if let Some(i) = items
        .windows(2)
        .position(|w| cmp(&w[0], &w[1]) == Ordering::Greater)
    {
        report.push(code, Some(i + 1));
    }
}

/// Collects every invariant violation in `bundle`. Never fails.
pub fn validate_bundle(bundle: &FeatureBundle) -> ValidationReport {
    let mut report = ValidationReport::default();
    let meta = &bundle.metadata;
    if meta.clip_id.is_empty() {
        report.push("metadata.empty_clip_id", None);
    }
    if !(meta.duration_s >= 0.0 && meta.duration_s.is_finite()) {
        report.push("metadata.negative_duration", None);
    }

    for (i, e) in bundle.events.iter().enumerate() {
        if !(e.start_s.is_finite() && e.end_s.is_finite()) {
            report.push("event.non_finite", Some(i));
            continue;
        }
        if e.start_s < 0.0 {
            report.push("event.negative_start", Some(i));
        }
        if e.start_s > e.end_s {
            report.push("event.start_after_end", Some(i));
        }
        if e.end_s > meta.duration_s + EVENT_END_TOLERANCE_S {
            report.push("event.end_after_duration", Some(i));
        }
        if !unit_interval(e.confidence) {
            report.push("event.confidence_range", Some(i));
        }
    }
    check_sorted(&bundle.events, cmp_event, "event.unsorted", &mut report);

    for (i, t) in bundle.transcript.iter().enumerate() {
        if !(t.start_s.is_finite() && t.end_s.is_finite()) {
            report.push("transcript.non_finite", Some(i));
            continue;
        }
        if t.start_s < 0.0 {
            report.push("transcript.negative_start", Some(i));
        }
        if t.start_s > t.end_s {
            report.push("transcript.start_after_end", Some(i));
        }
        if t.text.trim().is_empty() {
            report.push("transcript.empty_text", Some(i));
        }
    }
    check_sorted(&bundle.transcript, cmp_transcript, "transcript.unsorted", &mut report);

    if let Some(emotion) = &bundle.emotion {
        let values = [emotion.valence, emotion.arousal, emotion.dominance];
        if !values.iter().all(|v| unit_interval(*v)) {
            report.push("emotion.value_range", None);
        } else if discretize_emotion(emotion.valence, emotion.arousal, emotion.dominance)
            != Ok(emotion.label)
        {
            report.push("emotion.label_mismatch", None);
        }
    }

    for (i, n) in bundle.notes.iter().enumerate() {
        if !(n.onset_s.is_finite() && n.offset_s.is_finite()) {
            report.push("note.non_finite", Some(i));
            continue;
        }
        if n.onset_s < 0.0 {
            report.push("note.negative_start", Some(i));
        }
        if n.onset_s >= n.offset_s {
            report.push("note.onset_not_before_offset", Some(i));
        }
        if n.midi_pitch > 127 {
            report.push("note.pitch_range", Some(i));
        }
        if n.velocity > 127 {
            report.push("note.velocity_range", Some(i));
        }
    }
    check_sorted(&bundle.notes, cmp_note, "note.unsorted", &mut report);

    for (i, c) in bundle.chords.iter().enumerate() {
        if !(c.start_s.is_finite() && c.end_s.is_finite()) {
            report.push("chord.non_finite", Some(i));
            continue;
        }
        if c.start_s < 0.0 {
            report.push("chord.negative_start", Some(i));
        }
        if c.start_s >= c.end_s {
            report.push("chord.start_not_before_end", Some(i));
        }
        if i > 0 {
            let prev = &bundle.chords[i - 1];
            if c.start_s < prev.start_s {
                report.push("chord.unordered", Some(i));
            } else if c.start_s < prev.end_s {
                report.push("chord.overlap", Some(i));
            }
            if c.symbol == prev.symbol {
                report.push("chord.adjacent_duplicate", Some(i));
            }
        }
    }

    for (i, t) in bundle.music_tags.iter().enumerate() {
        if !unit_interval(t.confidence) {
            report.push("music_tag.confidence_range", Some(i));
        }
    }
    check_sorted(&bundle.music_tags, cmp_music_tag, "music_tag.unsorted", &mut report);

    for layer in bundle.nonempty_layers().iter() {
        if !bundle.extractor_provenance.contains_key(&layer) {
            report.push("provenance.missing", Some(layer as usize));
        }
    }
    report
}
