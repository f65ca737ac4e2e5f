//! URDF reading and writing for the subset the engine consumes.
//!
//! Links, joints, origins, axes and limits are extracted. Inertial, visual,
//! collision, transmission, mimic and gazebo elements are accepted and ignored.

use std::fmt::Write as _;
use std::path::Path;

use roxmltree::{Document, Node};
use teleop_otg_core::robot::{JointType, ModelJoint, ModelLimits, Origin, RobotModel};

use crate::error::{BridgeError, Result};

struct Ctx<'a> {
    doc: &'a Document<'a>,
    path: &'a str,
}

impl Ctx<'_> {
    fn error(&self, node: Node, message: impl Into<String>) -> BridgeError {
        let pos = self.doc.text_pos_at(node.range().start);
        BridgeError::Urdf { path: self.path.into(), line: pos.row, column: pos.col, message: message.into() }
    }

    fn attr<'n>(&self, node: Node<'n, '_>, name: &str) -> Result<&'n str> {
        node.attribute(name)
            .ok_or_else(|| self.error(node, format!("<{}> is missing attribute '{name}'", node.tag_name().name())))
    }

    fn number(&self, node: Node, name: &str, default: Option<f64>) -> Result<f64> {
        match (node.attribute(name), default) {
            (Some(v), _) => v
                .trim()
                .parse()
                .map_err(|_| self.error(node, format!("attribute '{name}' is not a number: '{v}'"))),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(self.error(node, format!("<{}> is missing attribute '{name}'", node.tag_name().name()))),
        }
    }

    fn triple(&self, node: Node, name: &str, default: [f64; 3]) -> Result<[f64; 3]> {
        let Some(v) = node.attribute(name) else { return Ok(default) };
        let parts: Vec<f64> = v
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| self.error(node, format!("attribute '{name}' is not a number triple: '{v}'")))?;
        <[f64; 3]>::try_from(parts)
            .map_err(|_| self.error(node, format!("attribute '{name}' needs three numbers: '{v}'")))
    }
}

fn child<'a, 'i>(node: Node<'a, 'i>, tag: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.is_element() && c.has_tag_name(tag))
}

/// Parses a URDF document. `source` names it in error messages.
pub fn parse_urdf(text: &str, source: &str) -> Result<RobotModel> {
    let doc = Document::parse(text).map_err(|e| {
        let pos = e.pos();
        BridgeError::Urdf { path: source.into(), line: pos.row, column: pos.col, message: e.to_string() }
    })?;
    let ctx = Ctx { doc: &doc, path: source };
    let root = doc.root_element();
    if !root.has_tag_name("robot") {
        return Err(ctx.error(root, format!("root element is <{}>, expected <robot>", root.tag_name().name())));
    }
    let name = root.attribute("name").unwrap_or_default().to_string();
    let mut links = Vec::new();
    let mut joints = Vec::new();
    for node in root.children().filter(Node::is_element) {
        match node.tag_name().name() {
            "link" => links.push(ctx.attr(node, "name")?.to_string()),
            "joint" => joints.push(parse_joint(&ctx, node)?),
            _ => {}
        }
    }
    let model = RobotModel { name, links, joints };
    model.validate()?;
    Ok(model)
}

fn parse_joint(ctx: &Ctx, node: Node) -> Result<ModelJoint> {
    let name = ctx.attr(node, "name")?.to_string();
    let kind = ctx.attr(node, "type")?;
    let joint_type = JointType::parse(kind)
        .ok_or_else(|| ctx.error(node, format!("joint '{name}' has unsupported type '{kind}'")))?;
    let link_of = |tag: &str| -> Result<String> {
        let n = child(node, tag).ok_or_else(|| ctx.error(node, format!("joint '{name}' has no <{tag}>")))?;
        Ok(ctx.attr(n, "link")?.to_string())
    };
    let (parent, child_link) = (link_of("parent")?, link_of("child")?);
    let origin = match child(node, "origin") {
        Some(o) => Origin { xyz: ctx.triple(o, "xyz", [0.0; 3])?, rpy: ctx.triple(o, "rpy", [0.0; 3])? },
        None => Origin::default(),
    };
    let axis = match child(node, "axis") {
        Some(a) => ctx.triple(a, "xyz", [1.0, 0.0, 0.0])?,
        None => [1.0, 0.0, 0.0],
    };
    let limits = match child(node, "limit") {
        Some(l) => Some(ModelLimits {
            lower: ctx.number(l, "lower", Some(0.0))?,
            upper: ctx.number(l, "upper", Some(0.0))?,
            velocity: ctx.number(l, "velocity", None)?,
            effort: ctx.number(l, "effort", Some(0.0))?,
        }),
        None if matches!(joint_type, JointType::Revolute | JointType::Prismatic) => {
            return Err(ctx.error(node, format!("joint '{name}' is missing its <limit> element")));
        }
        None => None,
    };
    Ok(ModelJoint { name, joint_type, parent, child: child_link, origin, axis, limits })
}

/// Reads and parses a URDF file.
pub fn load_urdf(path: &Path) -> Result<RobotModel> {
    let text = std::fs::read_to_string(path).map_err(|e| BridgeError::io(path.display().to_string(), e))?;
    parse_urdf(&text, &path.display().to_string())
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn triple(v: &[f64; 3]) -> String {
    format!("{} {} {}", v[0], v[1], v[2])
}

/// Writes `model` back as URDF. Numbers use the shortest exact representation.
pub fn serialize_urdf(model: &RobotModel) -> String {
    let mut out = String::from("<?xml version=\"1.0\"?>\n");
    let _ = writeln!(out, "<robot name=\"{}\">", escape(&model.name));
    for link in &model.links {
        let _ = writeln!(out, "  <link name=\"{}\"/>", escape(link));
    }
    for j in &model.joints {
        let _ = writeln!(out, "  <joint name=\"{}\" type=\"{}\">", escape(&j.name), j.joint_type.as_str());
        let _ = writeln!(out, "    <parent link=\"{}\"/>", escape(&j.parent));
        let _ = writeln!(out, "    <child link=\"{}\"/>", escape(&j.child));
        let _ = writeln!(out, "    <origin xyz=\"{}\" rpy=\"{}\"/>", triple(&j.origin.xyz), triple(&j.origin.rpy));
        let _ = writeln!(out, "    <axis xyz=\"{}\"/>", triple(&j.axis));
        if let Some(l) = &j.limits {
            let _ = writeln!(
                out,
                "    <limit lower=\"{}\" upper=\"{}\" velocity=\"{}\" effort=\"{}\"/>",
                l.lower, l.upper, l.velocity, l.effort
            );
        }
        out.push_str("  </joint>\n");
    }
    out.push_str("</robot>\n");
    out
}
