use super::document::{ConfigDocument, ReceptorKind};
use super::generate::UNIT_SCALE;
use super::ConfigError;
use crate::data::CLASSES;
use crate::encoding::EncodingParams;
use crate::engine::{LinkKind, LinkSpec, Network, NetworkBuilder, ReceptorRole, SectionSpec, THRESHOLD};
use crate::plasticity::{PlasticityParams, WeightMap};

/// Neuron threshold and synaptic weight mapping used when compiling a
/// document.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dynamics {
    pub threshold: f64,
    pub weight_map: WeightMap,
}

impl Dynamics {
    /// Weights read in config units: the threshold is [`UNIT_SCALE`], so the
    /// fixed weights 9 and 10 sit just above it and the bias 3 below, and
    /// plastic weights saturate smoothly. An initial resource of 1.267 then
    /// maps to a weight of about zero.
    pub const CONFIG_UNITS: Dynamics = Dynamics { threshold: UNIT_SCALE, weight_map: WeightMap::Saturating };

    /// Weights read as multiples of a unit threshold and clamped to their
    /// bounds, so every plastic weight starts saturated at `maxweight`.
    pub const NORMALIZED: Dynamics = Dynamics { threshold: THRESHOLD, weight_map: WeightMap::Clamp };
}

impl Default for Dynamics {
    fn default() -> Self {
        Self::CONFIG_UNITS
    }
}

/// Class dimension shared by every structured section, 10 when none is
/// declared.
fn class_dim(doc: &ConfigDocument) -> Result<usize, ConfigError> {
    let mut dims = doc.network.sections.iter().filter_map(|s| s.structure.as_ref()).map(|s| s.dimension as usize);
    let Some(first) = dims.next() else {
        return Ok(CLASSES);
    };
    if first == 0 || dims.any(|d| d != first) {
        return Err(ConfigError::Invalid("sections disagree on the class dimension".into()));
    }
    Ok(first)
}

/// Compiles a validated document into a network with a seeded rng.
///
/// Plastic links take their depression step, weight bounds and windows from
/// the target section's plasticity block, their dopamine step from the
/// reward link into the same section, and their cutoff from the label
/// receptor's learning time.
pub fn build_network(doc: &ConfigDocument, seed: u64) -> Result<Network, ConfigError> {
    build_network_with(doc, seed, Dynamics::default())
}

/// As [`build_network`] with explicit dynamics.
pub fn build_network_with(doc: &ConfigDocument, seed: u64, dynamics: Dynamics) -> Result<Network, ConfigError> {
    doc.validate()?;
    let dim = class_dim(doc)?;
    if let Some(copies) = doc.network.ncopies {
        for s in &doc.network.sections {
            if let Some(st) = &s.structure {
                if s.n != st.dimension as usize * copies as usize {
                    return Err(ConfigError::Invalid(format!(
                        "section {} has {} neurons, expected {} x {copies} copies",
                        s.name, s.n, st.dimension
                    )));
                }
            }
        }
    }

    let mut b = NetworkBuilder::new(seed).class_dim(dim).threshold(dynamics.threshold);
    for r in &doc.receptors {
        let role = match &r.kind {
            ReceptorKind::Image(_) => ReceptorRole::Pixels,
            ReceptorKind::StateClassifier(_) => ReceptorRole::Classes,
            ReceptorKind::Other(imp) => {
                return Err(ConfigError::Invalid(format!(
                    "receptor {}: unsupported implementation {:?}",
                    r.name,
                    imp.get_attr("lib").unwrap_or("?")
                )))
            }
        };
        b.receptor(&r.name, r.n, role);
    }
    for s in &doc.network.sections {
        b.section(SectionSpec { name: s.name.clone(), n: s.n, chartime: s.chartime });
    }

    let learning_until = doc.classifier().map_or(u64::MAX, |(_, a)| a.learning_time);
    for link in &doc.network.links {
        let delay = link.delay.map_or((0, 0), |d| (d.min as u32, d.max as u32));
        let mut spec =
            LinkSpec::new(&link.from, &link.to, link.kind, link.effective_policy(), link.weight.unwrap_or(0.0));
        spec.delay = delay;
        spec.probability = link.probability.unwrap_or(1.0);
        if link.kind == LinkKind::Plastic {
            let target = doc.section(&link.to).expect("validated endpoint");
            let p = target.plasticity.as_ref().ok_or_else(|| {
                ConfigError::Invalid(format!("plastic link into {} which has no plasticity block", link.to))
            })?;
            let dopamine = doc
                .network
                .links
                .iter()
                .find(|l| l.kind == LinkKind::Reward && l.to == link.to)
                .and_then(|l| l.weight)
                .unwrap_or(0.0);
            let ini = link.ini_resource.expect("parser requires IniResource");
            spec.ini_resource = (ini.min, ini.max);
            spec.plasticity = Some(PlasticityParams {
                depression: p.weight_inc.abs(),
                dopamine,
                dopamine_window: p.dopamine_plasticity_time,
                eligibility_window: p.max_tss_isi,
                learning_until,
                min_weight: p.minweight,
                max_weight: p.maxweight,
                resource_ceiling: ini.max.max(p.maxweight),
                map: dynamics.weight_map,
            });
        }
        b.link(spec)?;
    }
    Ok(b.build())
}

/// Encoder timing declared by the image receptor (defaults when absent).
pub fn encoding_params(doc: &ConfigDocument) -> Result<EncodingParams, ConfigError> {
    let Some((_, a)) = doc.image_receptor() else {
        return Ok(EncodingParams::default());
    };
    let presentation = a.image_presentation_time;
    let silence = a.ntact_per_image.checked_sub(presentation).ok_or_else(|| {
        ConfigError::Invalid(format!("ntact_per_image {} < presentation {presentation}", a.ntact_per_image))
    })?;
    let max_spikes = (f64::from(presentation) * a.maxfrequency).floor() as u32;
    EncodingParams::new(presentation, silence, max_spikes)
        .ok_or_else(|| ConfigError::Invalid("image receptor timing is not encodable".into()))
}

/// Name of the section the readout tallies.
pub fn readout_section(doc: &ConfigDocument) -> Option<&str> {
    doc.readout.as_ref().map(|r| r.output.as_str())
}
