//! Builds a network description from the four searchable hyperparameters.

use super::document::{
    ClassifierArgs, ConfigDocument, ImageArgs, LinkDecl, NetworkDecl, PlasticityDecl, ReadoutDecl, ReceptorDecl,
    ReceptorKind, SectionDecl, Structure, UniformRange,
};
use super::ConfigError;
use crate::data::{CLASSES, IMAGE_SIDE, PIXELS};
use crate::engine::{LinkKind, Policy};

/// Hyperparameters are expressed relative to a unit maximum weight scale;
/// emitted configs multiply them by this factor, which maps `w_max = 0.1`
/// onto the reference `maxweight` of 0.864249.
pub const UNIT_SCALE: f64 = 0.864249 / 0.1;

/// Initial resource over `maxweight` in the reference network
/// (1.267 / 0.864249): plastic weights start saturated, with headroom.
pub const INITIAL_RESOURCE_RATIO: f64 = 1.267 / 0.864249;

/// One point of the hyperparameter search space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyperparameters {
    /// Shared anti-Hebbian and dopamine step.
    pub learning_rate: f64,
    pub w_max: f64,
    pub w_min: f64,
    pub microcolumns: u32,
}

impl Hyperparameters {
    pub const LEARNING_RATE: (f64, f64) = (0.0004, 0.1);
    pub const W_MAX: (f64, f64) = (0.004, 0.4);
    pub const W_MIN: (f64, f64) = (-0.4, -0.0004);
    pub const MICROCOLUMNS: (u32, u32) = (1, 30);

    /// Best point of the reference search.
    pub const OPTIMUM: Hyperparameters =
        Hyperparameters { learning_rate: 0.005, w_max: 0.1, w_min: -0.082, microcolumns: 15 };

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn check(name: &str, v: f64, (lo, hi): (f64, f64)) -> Result<(), ConfigError> {
            if (lo..=hi).contains(&v) {
                Ok(())
            } else {
                Err(ConfigError::OutOfRange(format!("{name} = {v} not in [{lo}, {hi}]")))
            }
        }
        check("learning rate", self.learning_rate, Self::LEARNING_RATE)?;
        check("w_max", self.w_max, Self::W_MAX)?;
        check("w_min", self.w_min, Self::W_MIN)?;
        let (lo, hi) = Self::MICROCOLUMNS;
        if !(lo..=hi).contains(&self.microcolumns) {
            return Err(ConfigError::OutOfRange(format!("microcolumns = {} not in [{lo}, {hi}]", self.microcolumns)));
        }
        Ok(())
    }
}

fn section(name: &str, n: usize, structured: bool, chartime: f64) -> SectionDecl {
    SectionDecl {
        name: name.into(),
        n,
        structure: structured.then(|| Structure { kind: "O".into(), dimension: CLASSES as u32 }),
        chartime,
        plasticity: None,
        extra: Vec::new(),
    }
}

/// Emits the layered network for `h`: learning, WTA and reward-gate
/// sections of `10 * M` neurons, output and bias-gate sections of 10, with
/// the fixed wiring weights and delays of the reference network.
pub fn generate_config(h: &Hyperparameters) -> Result<ConfigDocument, ConfigError> {
    h.validate()?;
    let m = h.microcolumns as usize;
    let d = h.learning_rate * UNIT_SCALE;
    let w_max = h.w_max * UNIT_SCALE;
    let w_min = h.w_min * UNIT_SCALE;
    let ini = w_max * INITIAL_RESOURCE_RATIO;

    let receptors = vec![
        ReceptorDecl {
            name: "R".into(),
            n: PIXELS,
            kind: ReceptorKind::Image(ImageArgs {
                lib: "fromFile".into(),
                source: "MNIST.bin".into(),
                width: IMAGE_SIDE,
                height: IMAGE_SIDE,
                offset: 0,
                ntact_per_image: 20,
                image_presentation_time: 10,
                maxfrequency: 1.0,
                extra: Vec::new(),
            }),
        },
        ReceptorDecl {
            name: "Target".into(),
            n: CLASSES,
            kind: ReceptorKind::StateClassifier(ClassifierArgs {
                target_file: "MNIST.target".into(),
                spike_period: 1,
                state_duration: 20,
                learning_time: 1_200_000,
                no_class: "-".into(),
                prediction_file: "restmp.csv".into(),
                extra: Vec::new(),
            }),
        },
    ];

    let mut learning = section("L", CLASSES * m, true, 3.0);
    learning.plasticity = Some(PlasticityDecl {
        weight_inc: -d,
        dopamine_plasticity_time: 10,
        minweight: w_min,
        maxweight: w_max,
        three_factor: true,
        max_tss_isi: 10,
    });
    let sections = vec![
        learning,
        section("WTA", CLASSES * m, true, 1.0),
        section("REWGATE", CLASSES * m, true, 1.0),
        section("OUT", CLASSES, false, 1.0),
        section("BIASGATE", CLASSES, false, 1.0),
    ];

    let mut plastic = LinkDecl::new("R", "L", LinkKind::Plastic, None);
    plastic.ini_resource = Some(UniformRange { min: ini, max: ini });
    plastic.probability = Some(1.0);
    plastic.maxnpre = Some(1000);
    let aligned = Some(Policy::Aligned);
    let links = vec![
        plastic,
        LinkDecl::new("L", "WTA", LinkKind::Static, aligned).weight(9.0),
        LinkDecl::new("WTA", "WTA", LinkKind::Gating, Some(Policy::AllToAllSections)).weight(-10.0),
        LinkDecl::new("WTA", "REWGATE", LinkKind::Gating, aligned).weight(1.0),
        LinkDecl::new("REWGATE", "L", LinkKind::Reward, aligned).weight(d),
        LinkDecl::new("WTA", "OUT", LinkKind::Static, aligned).weight(10.0),
        LinkDecl::new("OUT", "BIASGATE", LinkKind::Gating, aligned).weight(-20.0),
        LinkDecl::new("Target", "REWGATE", LinkKind::Static, aligned).weight(10.0),
        LinkDecl::new("Target", "BIASGATE", LinkKind::Static, aligned).weight(10.0).delay(10.0),
        LinkDecl::new("Target", "BIASGATE", LinkKind::Static, Some(Policy::Exclusive)).weight(-30.0),
        LinkDecl::new("BIASGATE", "L", LinkKind::Static, aligned).weight(3.0),
    ];

    Ok(ConfigDocument {
        globals: vec![0.0, 0.023817],
        receptors,
        network: NetworkDecl { ncopies: Some(h.microcolumns), sections, links },
        readout: Some(ReadoutDecl { lib: "StateClassifier".into(), output: "OUT".into() }),
        extra: Vec::new(),
    })
}
