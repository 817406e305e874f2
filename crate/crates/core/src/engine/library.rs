use std::collections::BTreeMap;

use crate::friendliness::GaitMap;
use crate::motion::{procedural, ClipKind, MotionClip};

/// Gait and gesture clips the engine can play, plus the calibrated
/// friendliness of each gait.
#[derive(Clone, Debug)]
pub struct ClipLibrary {
    gaits: BTreeMap<String, MotionClip>,
    gestures: BTreeMap<String, MotionClip>,
    gait_map: GaitMap,
}

impl ClipLibrary {
    /// Synthesized clips for every gait in the bundled map. Each gait's
    /// style follows its calibrated friendliness.
    pub fn procedural() -> Self {
        let gait_map = GaitMap::bundled();
        let gaits = gait_map
            .entries
            .iter()
            .map(|e| (e.gait_id.clone(), procedural::gait_clip(&e.gait_id, e.f)))
            .collect();
        let gestures = [
            procedural::head_nod(),
            procedural::head_shake(),
            procedural::wave_open(),
            procedural::wave_closed(),
        ]
        .into_iter()
        .map(|c| (c.id.clone(), c))
        .collect();
        ClipLibrary {
            gaits,
            gestures,
            gait_map,
        }
    }

    /// Replaces the gait map; every gait in it needs a clip (synthesized
    /// from its friendliness when none is loaded).
    pub fn with_gait_map(mut self, map: GaitMap) -> Self {
        for e in &map.entries {
            self.gaits
                .entry(e.gait_id.clone())
                .or_insert_with(|| procedural::gait_clip(&e.gait_id, e.f));
        }
        self.gait_map = map;
        self
    }

    /// Adds or replaces a clip, filed by its kind.
    pub fn insert(&mut self, clip: MotionClip) {
        match clip.kind {
            ClipKind::Gait => self.gaits.insert(clip.id.clone(), clip),
            ClipKind::GestureHand | ClipKind::GestureHead => self.gestures.insert(clip.id.clone(), clip),
        };
    }

    pub fn gait(&self, id: &str) -> Option<&MotionClip> {
        self.gaits.get(id)
    }

    pub fn gesture(&self, id: &str) -> Option<&MotionClip> {
        self.gestures.get(id)
    }

    pub fn gait_map(&self) -> &GaitMap {
        &self.gait_map
    }
}

impl Default for ClipLibrary {
    fn default() -> Self {
        ClipLibrary::procedural()
    }
}
