//! Typed view of a network description.
//!
//! Elements the dialect defines but the simulator does not interpret (the
//! `Global` scalars, `maxnpre`, `Structure`, `no_class`) are parsed, type
//! checked and kept. Elements the reader does not know at all are preserved
//! verbatim in `extra` lists so that a round trip loses nothing.

use std::collections::HashSet;

use super::xml::{self, Element, XmlError};
use super::ConfigError;
use crate::engine::{LinkKind, Policy};

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ConfigDocument {
    pub globals: Vec<f64>,
    pub receptors: Vec<ReceptorDecl>,
    pub network: NetworkDecl,
    pub readout: Option<ReadoutDecl>,
    pub extra: Vec<Element>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReceptorDecl {
    pub name: String,
    pub n: usize,
    pub kind: ReceptorKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ReceptorKind {
    Image(ImageArgs),
    StateClassifier(ClassifierArgs),
    /// An implementation this reader does not model; kept as written.
    Other(Element),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageArgs {
    pub lib: String,
    pub source: String,
    pub width: usize,
    pub height: usize,
    pub offset: u64,
    pub ntact_per_image: u32,
    pub image_presentation_time: u32,
    pub maxfrequency: f64,
    pub extra: Vec<Element>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierArgs {
    pub target_file: String,
    pub spike_period: u32,
    pub state_duration: u32,
    pub learning_time: u64,
    pub no_class: String,
    pub prediction_file: String,
    pub extra: Vec<Element>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct NetworkDecl {
    pub ncopies: Option<u32>,
    pub sections: Vec<SectionDecl>,
    pub links: Vec<LinkDecl>,
}

impl NetworkDecl {
    fn is_empty(&self) -> bool {
        self.ncopies.is_none() && self.sections.is_empty() && self.links.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Structure {
    pub kind: String,
    pub dimension: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SectionDecl {
    pub name: String,
    pub n: usize,
    pub structure: Option<Structure>,
    pub chartime: f64,
    pub plasticity: Option<PlasticityDecl>,
    pub extra: Vec<Element>,
}

/// Plasticity block of a section's `props`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlasticityDecl {
    pub weight_inc: f64,
    pub dopamine_plasticity_time: u64,
    pub minweight: f64,
    pub maxweight: f64,
    pub three_factor: bool,
    pub max_tss_isi: u64,
}

/// `type="uni"` range used by `IniResource` and `Delay`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformRange {
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkDecl {
    pub from: String,
    pub to: String,
    pub kind: LinkKind,
    /// `None` when the attribute is absent, which means full connectivity.
    pub policy: Option<Policy>,
    pub weight: Option<f64>,
    pub ini_resource: Option<UniformRange>,
    pub probability: Option<f64>,
    pub maxnpre: Option<u32>,
    pub delay: Option<UniformRange>,
    pub extra: Vec<Element>,
}

impl LinkDecl {
    pub fn new(from: &str, to: &str, kind: LinkKind, policy: Option<Policy>) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
            kind,
            policy,
            weight: None,
            ini_resource: None,
            probability: None,
            maxnpre: None,
            delay: None,
            extra: Vec::new(),
        }
    }

    pub fn weight(mut self, w: f64) -> Self {
        self.weight = Some(w);
        self
    }

    pub fn delay(mut self, ms: f64) -> Self {
        self.delay = Some(UniformRange { min: ms, max: ms });
        self
    }

    pub fn effective_policy(&self) -> Policy {
        self.policy.unwrap_or(Policy::Full)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReadoutDecl {
    pub lib: String,
    pub output: String,
}

impl ConfigDocument {
    pub fn section(&self, name: &str) -> Option<&SectionDecl> {
        self.network.sections.iter().find(|s| s.name == name)
    }

    pub fn receptor(&self, name: &str) -> Option<&ReceptorDecl> {
        self.receptors.iter().find(|r| r.name == name)
    }

    pub fn classifier(&self) -> Option<(&ReceptorDecl, &ClassifierArgs)> {
        self.receptors.iter().find_map(|r| match &r.kind {
            ReceptorKind::StateClassifier(a) => Some((r, a)),
            _ => None,
        })
    }

    pub fn image_receptor(&self) -> Option<(&ReceptorDecl, &ImageArgs)> {
        self.receptors.iter().find_map(|r| match &r.kind {
            ReceptorKind::Image(a) => Some((r, a)),
            _ => None,
        })
    }

    /// Name and size checks shared by the parser and the builder.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut names = HashSet::new();
        for name in self.receptors.iter().map(|r| &r.name).chain(self.network.sections.iter().map(|s| &s.name)) {
            if !names.insert(name.as_str()) {
                return Err(ConfigError::DuplicateName(name.clone()));
            }
        }
        for s in &self.network.sections {
            if s.n == 0 {
                return Err(ConfigError::Invalid(format!("section {} has no neurons", s.name)));
            }
            if s.chartime < 1.0 {
                return Err(ConfigError::Invalid(format!("section {} has chartime {} < 1", s.name, s.chartime)));
            }
        }
        for r in &self.receptors {
            if let ReceptorKind::Image(a) = &r.kind {
                if a.width * a.height != r.n {
                    return Err(ConfigError::Invalid(format!(
                        "receptor {}: {}x{} does not match n={}",
                        r.name, a.width, a.height, r.n
                    )));
                }
            }
        }
        let sections: HashSet<&str> = self.network.sections.iter().map(|s| s.name.as_str()).collect();
        for link in &self.network.links {
            if !names.contains(link.from.as_str()) {
                return Err(ConfigError::UndeclaredEndpoint(link.from.clone()));
            }
            if !sections.contains(link.to.as_str()) {
                return Err(ConfigError::UndeclaredEndpoint(link.to.clone()));
            }
        }
        if let Some(r) = &self.readout {
            if !sections.contains(r.output.as_str()) {
                return Err(ConfigError::UndeclaredEndpoint(r.output.clone()));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------- reading

fn number<T: std::str::FromStr>(el: &Element, raw: &str) -> Result<T, ConfigError> {
    raw.trim().parse().map_err(|_| ConfigError::NotNumeric {
        line: el.line,
        element: el.name.clone(),
        value: raw.to_string(),
    })
}

fn required<'a>(parent: &'a Element, name: &str) -> Result<&'a Element, ConfigError> {
    parent.find(name).ok_or_else(|| ConfigError::Missing {
        line: parent.line,
        parent: parent.name.clone(),
        child: name.into(),
    })
}

fn child_num<T: std::str::FromStr>(parent: &Element, name: &str) -> Result<T, ConfigError> {
    let el = required(parent, name)?;
    number(el, &el.text)
}

fn opt_num<T: std::str::FromStr>(parent: &Element, name: &str) -> Result<Option<T>, ConfigError> {
    parent.find(name).map(|el| number(el, &el.text)).transpose()
}

fn child_text(parent: &Element, name: &str) -> Result<String, ConfigError> {
    required(parent, name).map(|el| el.text.clone())
}

fn attr<'a>(el: &'a Element, key: &str) -> Result<&'a str, ConfigError> {
    el.get_attr(key).ok_or_else(|| ConfigError::Missing {
        line: el.line,
        parent: el.name.clone(),
        child: format!("@{key}"),
    })
}

fn extras(el: &Element, known: &[&str]) -> Vec<Element> {
    el.children.iter().filter(|c| !known.contains(&c.name.as_str())).cloned().collect()
}

fn range(el: &Element) -> Result<UniformRange, ConfigError> {
    match el.get_attr("type") {
        None | Some("uni") => {}
        Some(other) => {
            return Err(ConfigError::Invalid(format!("line {}: unsupported distribution {other:?}", el.line)));
        }
    }
    let r = UniformRange { min: child_num(el, "min")?, max: child_num(el, "max")? };
    if r.min > r.max {
        return Err(ConfigError::Invalid(format!("line {}: min {} > max {}", el.line, r.min, r.max)));
    }
    Ok(r)
}

const IMAGE_SPECIAL: &[&str] =
    &["width", "height", "offset", "ntact_per_image", "image_presentation_time", "maxfrequency"];
const CLASSIFIER_ARGS: &[&str] =
    &["target_file", "spike_period", "state_duration", "learning_time", "no_class", "prediction_file"];
const SECTION_PROPS: &[&str] = &[
    "n",
    "Structure",
    "chartime",
    "weight_inc",
    "dopamine_plasticity_time",
    "minweight",
    "maxweight",
    "three_factor_plasticity",
    "maxTSSISI",
];
const LINK_CHILDREN: &[&str] = &["weight", "IniResource", "probability", "maxnpre", "Delay"];

fn read_receptor(el: &Element) -> Result<ReceptorDecl, ConfigError> {
    let name = attr(el, "name")?.to_string();
    let n = number(el, attr(el, "n")?)?;
    let imp = required(el, "Implementation")?;
    let lib = attr(imp, "lib")?;
    let args = required(imp, "args")?;
    let kind = match (lib, args.get_attr("type")) {
        (_, Some("image")) => {
            let special = required(args, "Special")?;
            ReceptorKind::Image(ImageArgs {
                lib: lib.to_string(),
                source: child_text(args, "source")?,
                width: child_num(special, "width")?,
                height: child_num(special, "height")?,
                offset: child_num(special, "offset")?,
                ntact_per_image: child_num(special, "ntact_per_image")?,
                image_presentation_time: child_num(special, "image_presentation_time")?,
                maxfrequency: child_num(special, "maxfrequency")?,
                extra: extras(special, IMAGE_SPECIAL),
            })
        }
        ("StateClassifier", _) => ReceptorKind::StateClassifier(ClassifierArgs {
            target_file: child_text(args, "target_file")?,
            spike_period: child_num(args, "spike_period")?,
            state_duration: child_num(args, "state_duration")?,
            learning_time: child_num(args, "learning_time")?,
            no_class: child_text(args, "no_class")?,
            prediction_file: child_text(args, "prediction_file")?,
            extra: extras(args, CLASSIFIER_ARGS),
        }),
        _ => ReceptorKind::Other(imp.clone()),
    };
    Ok(ReceptorDecl { name, n, kind })
}

fn read_section(el: &Element) -> Result<SectionDecl, ConfigError> {
    let name = attr(el, "name")?.to_string();
    let props = required(el, "props")?;
    let structure = props
        .find("Structure")
        .map(|s| -> Result<_, ConfigError> {
            Ok(Structure { kind: attr(s, "type")?.to_string(), dimension: number(s, attr(s, "dimension")?)? })
        })
        .transpose()?;
    let plasticity = match props.find("weight_inc") {
        None => None,
        Some(_) => Some(PlasticityDecl {
            weight_inc: child_num(props, "weight_inc")?,
            dopamine_plasticity_time: child_num(props, "dopamine_plasticity_time")?,
            minweight: child_num(props, "minweight")?,
            maxweight: child_num(props, "maxweight")?,
            three_factor: props.find("three_factor_plasticity").is_some(),
            max_tss_isi: child_num(props, "maxTSSISI")?,
        }),
    };
    if let Some(p) = &plasticity {
        if p.minweight > p.maxweight {
            return Err(ConfigError::Invalid(format!("section {name}: minweight > maxweight")));
        }
    }
    Ok(SectionDecl {
        name,
        n: child_num(props, "n")?,
        structure,
        chartime: child_num(props, "chartime")?,
        plasticity,
        extra: extras(props, SECTION_PROPS),
    })
}

fn read_link(el: &Element) -> Result<LinkDecl, ConfigError> {
    let kind = match el.get_attr("type") {
        None => LinkKind::Static,
        Some(t) => t.parse().map_err(|_| ConfigError::Invalid(format!("line {}: unknown link type {t:?}", el.line)))?,
    };
    let policy = el
        .get_attr("policy")
        .map(|p| p.parse().map_err(|_| ConfigError::Invalid(format!("line {}: unknown policy {p:?}", el.line))))
        .transpose()?;
    let link = LinkDecl {
        from: attr(el, "from")?.to_string(),
        to: attr(el, "to")?.to_string(),
        kind,
        policy,
        weight: opt_num(el, "weight")?,
        ini_resource: el.find("IniResource").map(range).transpose()?,
        probability: opt_num(el, "probability")?,
        maxnpre: opt_num(el, "maxnpre")?,
        delay: el.find("Delay").map(range).transpose()?,
        extra: extras(el, LINK_CHILDREN),
    };
    if let Some(p) = link.probability {
        if !(0.0..=1.0).contains(&p) {
            return Err(ConfigError::Invalid(format!("line {}: probability {p} outside [0,1]", el.line)));
        }
    }
    if link.delay.is_some_and(|d| d.min < 0.0 || d.min.fract() != 0.0 || d.max.fract() != 0.0) {
        return Err(ConfigError::Invalid(format!("line {}: delays must be nonnegative whole ms", el.line)));
    }
    match link.kind {
        LinkKind::Plastic if link.ini_resource.is_none() => {
            Err(ConfigError::Missing { line: el.line, parent: "Link".into(), child: "IniResource".into() })
        }
        LinkKind::Static | LinkKind::Gating | LinkKind::Reward if link.weight.is_none() => {
            Err(ConfigError::Missing { line: el.line, parent: "Link".into(), child: "weight".into() })
        }
        _ => Ok(link),
    }
}

/// Collects sections and links. Links may sit next to sections inside
/// `<Sections>` or directly under `<NETWORK>`.
fn read_network(el: &Element, net: &mut NetworkDecl, extra: &mut Vec<Element>) -> Result<(), ConfigError> {
    for child in &el.children {
        match child.name.as_str() {
            "Sections" => read_network(child, net, extra)?,
            "Section" => net.sections.push(read_section(child)?),
            "Link" => net.links.push(read_link(child)?),
            _ => extra.push(child.clone()),
        }
    }
    Ok(())
}

impl ConfigDocument {
    pub fn from_element(root: &Element) -> Result<Self, ConfigError> {
        if root.name != "SNN" {
            return Err(ConfigError::Invalid(format!("root element is <{}>, expected <SNN>", root.name)));
        }
        let mut doc = ConfigDocument::default();
        for child in &root.children {
            match child.name.as_str() {
                "Global" => doc.globals.push(number(child, &child.text)?),
                "RECEPTORS" => doc.receptors.push(read_receptor(child)?),
                "NETWORK" => {
                    doc.network.ncopies = child.get_attr("ncopies").map(|v| number(child, v)).transpose()?;
                    let mut net_extra = Vec::new();
                    read_network(child, &mut doc.network, &mut net_extra)?;
                    // unknown network-level elements are kept with the top-level extras
                    doc.extra.extend(net_extra);
                }
                "Readout" => {
                    doc.readout =
                        Some(ReadoutDecl { lib: attr(child, "lib")?.to_string(), output: child_text(child, "output")? })
                }
                _ => doc.extra.push(child.clone()),
            }
        }
        doc.validate()?;
        Ok(doc)
    }

    pub fn to_element(&self) -> Element {
        let mut root = Element::new("SNN");
        for g in &self.globals {
            root.children.push(Element::with_text("Global", g));
        }
        for r in &self.receptors {
            root.children.push(write_receptor(r));
        }
        if !self.network.is_empty() {
            let mut sections = Element::new("Sections");
            for s in &self.network.sections {
                sections.children.push(write_section(s));
            }
            for l in &self.network.links {
                sections.children.push(write_link(l));
            }
            let mut net = Element::new("NETWORK");
            if let Some(n) = self.network.ncopies {
                net = net.attr("ncopies", n);
            }
            root.children.push(net.child(sections));
        }
        if let Some(r) = &self.readout {
            root.children
                .push(Element::new("Readout").attr("lib", &r.lib).child(Element::with_text("output", &r.output)));
        }
        root.children.extend(self.extra.iter().cloned());
        root
    }
}

fn write_receptor(r: &ReceptorDecl) -> Element {
    let el = Element::new("RECEPTORS").attr("name", &r.name).attr("n", r.n);
    let imp = match &r.kind {
        ReceptorKind::Image(a) => {
            let mut special = Element::new("Special")
                .child(Element::with_text("width", a.width))
                .child(Element::with_text("height", a.height))
                .child(Element::with_text("offset", a.offset))
                .child(Element::with_text("ntact_per_image", a.ntact_per_image))
                .child(Element::with_text("image_presentation_time", a.image_presentation_time))
                .child(Element::with_text("maxfrequency", a.maxfrequency));
            special.children.extend(a.extra.iter().cloned());
            Element::new("Implementation").attr("lib", &a.lib).child(
                Element::new("args")
                    .attr("type", "image")
                    .child(Element::with_text("source", &a.source))
                    .child(special),
            )
        }
        ReceptorKind::StateClassifier(a) => {
            let mut args = Element::new("args")
                .child(Element::with_text("target_file", &a.target_file))
                .child(Element::with_text("spike_period", a.spike_period))
                .child(Element::with_text("state_duration", a.state_duration))
                .child(Element::with_text("learning_time", a.learning_time))
                .child(Element::with_text("no_class", &a.no_class))
                .child(Element::with_text("prediction_file", &a.prediction_file));
            args.children.extend(a.extra.iter().cloned());
            Element::new("Implementation").attr("lib", "StateClassifier").child(args)
        }
        ReceptorKind::Other(imp) => imp.clone(),
    };
    el.child(imp)
}

fn write_section(s: &SectionDecl) -> Element {
    let mut props = Element::new("props").child(Element::with_text("n", s.n));
    if let Some(st) = &s.structure {
        props = props.child(Element::new("Structure").attr("type", &st.kind).attr("dimension", st.dimension));
    }
    props = props.child(Element::with_text("chartime", s.chartime));
    if let Some(p) = &s.plasticity {
        props = props
            .child(Element::with_text("weight_inc", p.weight_inc))
            .child(Element::with_text("dopamine_plasticity_time", p.dopamine_plasticity_time))
            .child(Element::with_text("minweight", p.minweight))
            .child(Element::with_text("maxweight", p.maxweight));
        if p.three_factor {
            props = props.child(Element::new("three_factor_plasticity"));
        }
        props = props.child(Element::with_text("maxTSSISI", p.max_tss_isi));
    }
    props.children.extend(s.extra.iter().cloned());
    Element::new("Section").attr("name", &s.name).child(props)
}

fn write_range(name: &str, r: &UniformRange) -> Element {
    Element::new(name)
        .attr("type", "uni")
        .child(Element::with_text("min", r.min))
        .child(Element::with_text("max", r.max))
}

fn write_link(l: &LinkDecl) -> Element {
    let mut el = Element::new("Link").attr("from", &l.from).attr("to", &l.to);
    if let Some(p) = l.policy {
        el = el.attr("policy", p);
    }
    if l.kind != LinkKind::Static {
        el = el.attr("type", l.kind);
    }
    if let Some(r) = &l.ini_resource {
        el = el.child(write_range("IniResource", r));
    }
    if let Some(w) = l.weight {
        el = el.child(Element::with_text("weight", w));
    }
    if let Some(p) = l.probability {
        el = el.child(Element::with_text("probability", p));
    }
    if let Some(m) = l.maxnpre {
        el = el.child(Element::with_text("maxnpre", m));
    }
    if let Some(d) = &l.delay {
        el = el.child(write_range("Delay", d));
    }
    el.children.extend(l.extra.iter().cloned());
    el
}

/// Parses the XML dialect into a validated document.
pub fn parse_config(text: &str) -> Result<ConfigDocument, ConfigError> {
    let root = xml::parse(text).map_err(|e: XmlError| ConfigError::Syntax(e))?;
    ConfigDocument::from_element(&root)
}

pub fn serialize_config(doc: &ConfigDocument) -> String {
    xml::write(&doc.to_element())
}
