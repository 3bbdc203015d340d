use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ProtocolError;

/// Widest field the codecs accept.
pub const MAX_FIELD_BITS: u32 = 64;

/// Semantic role bound to a protocol field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    RoutingKey,
    SrcAddr,
    Qos,
    Length,
    Payload,
    None,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::RoutingKey => "routing_key",
            Role::SrcAddr => "src_addr",
            Role::Qos => "qos",
            Role::Length => "length",
            Role::Payload => "payload",
            Role::None => "none",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "routing_key" => Role::RoutingKey,
            "src_addr" => Role::SrcAddr,
            "qos" => Role::Qos,
            "length" => Role::Length,
            "payload" => Role::Payload,
            "none" => Role::None,
            other => return Err(format!("unknown role `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    /// Width in bits. Payload fields are variable-length and carry 0 here.
    pub width_bits: u32,
    pub role: Role,
}

impl FieldSpec {
    pub fn new(name: impl Into<String>, width_bits: u32, role: Role) -> Self {
        Self {
            name: name.into(),
            width_bits,
            role,
        }
    }

    pub fn is_header(&self) -> bool {
        self.role != Role::Payload
    }
}

/// Value of an `arch <key>=<value>` hint line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArchHint {
    Auto,
    Pinned(String),
}

pub type ArchHints = BTreeMap<String, ArchHint>;

const ARCH_KEYS: [&str; 5] = ["scheduler", "fwd_table", "voq", "width_bits", "ports"];

/// A validated custom protocol. Header width is always recomputed from the
/// field list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    name: String,
    fields: Vec<FieldSpec>,
    #[serde(default)]
    arch_hints: ArchHints,
}

impl ProtocolSpec {
    pub fn new(name: impl Into<String>, fields: Vec<FieldSpec>) -> Result<Self, ProtocolError> {
        Self::with_hints(name, fields, ArchHints::new())
    }

    pub fn with_hints(
        name: impl Into<String>,
        fields: Vec<FieldSpec>,
        arch_hints: ArchHints,
    ) -> Result<Self, ProtocolError> {
        let mut seen = std::collections::BTreeSet::new();
        let mut roles = std::collections::BTreeSet::new();
        for f in &fields {
            if !seen.insert(f.name.as_str()) {
                return Err(ProtocolError::DuplicateField(f.name.clone()));
            }
            if f.role != Role::None && !roles.insert(f.role) {
                return Err(ProtocolError::DuplicateRole(f.role));
            }
            if f.is_header() {
                if f.width_bits == 0 {
                    return Err(ProtocolError::ZeroWidth(f.name.clone()));
                }
                if f.width_bits > MAX_FIELD_BITS {
                    return Err(ProtocolError::WidthTooLarge {
                        name: f.name.clone(),
                        width: f.width_bits,
                    });
                }
            }
        }
        if !roles.contains(&Role::RoutingKey) {
            return Err(ProtocolError::MissingRoutingKey);
        }
        Ok(Self {
            name: name.into(),
            fields,
            arch_hints,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn fields(&self) -> &[FieldSpec] {
        &self.fields
    }

    pub fn header_fields(&self) -> impl Iterator<Item = &FieldSpec> {
        self.fields.iter().filter(|f| f.is_header())
    }

    pub fn arch_hints(&self) -> &ArchHints {
        &self.arch_hints
    }

    pub fn field(&self, name: &str) -> Option<&FieldSpec> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn field_with_role(&self, role: Role) -> Option<&FieldSpec> {
        self.fields.iter().find(|f| f.role == role)
    }

    pub fn header_bits(&self) -> u32 {
        self.header_fields().map(|f| f.width_bits).sum()
    }

    /// Header length after zero-padding to a byte boundary.
    pub fn padded_header_bits(&self) -> u32 {
        self.header_bits().div_ceil(8) * 8
    }

    pub fn padded_header_bytes(&self) -> u32 {
        self.padded_header_bits() / 8
    }

    pub fn routing_key_bits(&self) -> u32 {
        self.field_with_role(Role::RoutingKey)
            .map(|f| f.width_bits)
            .unwrap_or(0)
    }

    pub fn binding(&self) -> SemanticBinding {
        let name_of = |role| self.field_with_role(role).map(|f| f.name.clone());
        SemanticBinding {
            routing_key: name_of(Role::RoutingKey).expect("validated spec has a routing key"),
            src_addr: name_of(Role::SrcAddr),
            qos: name_of(Role::Qos),
            length: name_of(Role::Length),
        }
    }

    /// Bit offset of a header field from the start of the packet.
    pub fn field_offset(&self, name: &str) -> Option<u32> {
        let mut off = 0;
        for f in self.header_fields() {
            if f.name == name {
                return Some(off);
            }
            off += f.width_bits;
        }
        None
    }
}

/// Maps semantic roles onto concrete field names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticBinding {
    pub routing_key: String,
    pub src_addr: Option<String>,
    pub qos: Option<String>,
    pub length: Option<String>,
}

impl SemanticBinding {
    pub fn validate(&self, spec: &ProtocolSpec) -> Result<(), ProtocolError> {
        let names = std::iter::once(&self.routing_key)
            .chain(self.src_addr.iter())
            .chain(self.qos.iter())
            .chain(self.length.iter());
        for n in names {
            if spec.field(n).is_none() {
                return Err(ProtocolError::UnknownField(n.clone()));
            }
        }
        Ok(())
    }
}

/// Parses the line-oriented protocol grammar:
///
/// ```text
/// protocol <name>
/// field <name> <width_bits|*> [role=<role>]
/// arch <key>=<value|auto>
/// ```
pub fn parse_spec(text: &str) -> Result<ProtocolSpec, ProtocolError> {
    let mut name: Option<String> = None;
    let mut fields = Vec::new();
    let mut hints = ArchHints::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let syntax = |msg: String| ProtocolError::Syntax { line, msg };
        let mut toks = content.split_whitespace();
        match toks.next() {
            Some("protocol") => {
                let n = toks
                    .next()
                    .ok_or_else(|| syntax("protocol needs a name".into()))?;
                if toks.next().is_some() {
                    return Err(syntax("trailing tokens after protocol name".into()));
                }
                if name.is_some() {
                    return Err(syntax("protocol declared twice".into()));
                }
                check_ident(n).map_err(syntax)?;
                name = Some(n.to_string());
            }
            Some("field") => {
                let fname = toks.next().ok_or_else(|| syntax("field needs a name".into()))?;
                check_ident(fname).map_err(syntax)?;
                let mut width: Option<u32> = None;
                let mut role = Role::None;
                for tok in toks {
                    if let Some(r) = tok.strip_prefix("role=") {
                        role = r.parse().map_err(syntax)?;
                    } else if width.is_none() {
                        width = Some(if tok == "*" {
                            0
                        } else {
                            tok.parse()
                                .map_err(|_| syntax(format!("bad width `{tok}`")))?
                        });
                    } else {
                        return Err(syntax(format!("unexpected token `{tok}`")));
                    }
                }
                let width = match (width, role) {
                    (Some(w), _) => w,
                    (None, Role::Payload) => 0,
                    (None, _) => return Err(syntax(format!("field `{fname}` needs a width"))),
                };
                let width = if role == Role::Payload { 0 } else { width };
                fields.push(FieldSpec::new(fname, width, role));
            }
            Some("arch") => {
                for tok in toks {
                    let (k, v) = tok
                        .split_once('=')
                        .ok_or_else(|| syntax(format!("expected key=value, got `{tok}`")))?;
                    if !ARCH_KEYS.contains(&k) {
                        return Err(syntax(format!("unknown arch key `{k}`")));
                    }
                    let hint = if v == "auto" {
                        ArchHint::Auto
                    } else {
                        ArchHint::Pinned(v.to_string())
                    };
                    hints.insert(k.to_string(), hint);
                }
            }
            Some(other) => return Err(syntax(format!("unknown directive `{other}`"))),
            None => unreachable!(),
        }
    }

    let name = name.ok_or(ProtocolError::Syntax {
        line: 1,
        msg: "missing `protocol <name>` line".into(),
    })?;
    ProtocolSpec::with_hints(name, fields, hints)
}

fn check_ident(s: &str) -> Result<(), String> {
    let mut chars = s.chars();
    let ok = chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if ok {
        Ok(())
    } else {
        Err(format!("`{s}` is not a valid identifier"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "\
protocol basic
field dst 8 role=routing_key
field src 8 role=src_addr
field len 8
field data * role=payload
";

    #[test]
    fn header_excludes_payload() {
        let spec = parse_spec(BASIC).unwrap();
        assert_eq!(spec.header_bits(), 24);
        assert_eq!(spec.fields().len(), 4);
        assert_eq!(spec.binding().src_addr.as_deref(), Some("src"));
    }

    #[test]
    fn compressed_two_byte_header() {
        let spec = parse_spec(
            "protocol tiny\nfield dst 4 role=routing_key\nfield src 4\nfield type 8\n",
        )
        .unwrap();
        assert_eq!(spec.header_bits(), 16);
        assert_eq!(spec.padded_header_bytes(), 2);
    }

    #[test]
    fn rejects_two_routing_keys() {
        let err = parse_spec(
            "protocol p\nfield a 4 role=routing_key\nfield b 4 role=routing_key\n",
        )
        .unwrap_err();
        assert_eq!(err, ProtocolError::DuplicateRole(Role::RoutingKey));
    }

    #[test]
    fn rejects_missing_key_zero_width_duplicates() {
        assert_eq!(
            parse_spec("protocol p\nfield a 4\n").unwrap_err(),
            ProtocolError::MissingRoutingKey
        );
        assert_eq!(
            parse_spec("protocol p\nfield a 0 role=routing_key\n").unwrap_err(),
            ProtocolError::ZeroWidth("a".into())
        );
        assert_eq!(
            parse_spec("protocol p\nfield a 4 role=routing_key\nfield a 4\n").unwrap_err(),
            ProtocolError::DuplicateField("a".into())
        );
        assert!(matches!(
            parse_spec("protocol p\nfield a 65 role=routing_key\n").unwrap_err(),
            ProtocolError::WidthTooLarge { .. }
        ));
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse_spec("protocol p\n# comment\nfield a x role=routing_key\n").unwrap_err();
        assert!(matches!(err, ProtocolError::Syntax { line: 3, .. }), "{err:?}");
        let err = parse_spec("protocol p\nfield a 4 role=routing_key\nbogus\n").unwrap_err();
        assert!(matches!(err, ProtocolError::Syntax { line: 3, .. }));
        let err = parse_spec("protocol p\nfield a 4 role=boss\n").unwrap_err();
        assert!(matches!(err, ProtocolError::Syntax { line: 2, .. }));
    }

    #[test]
    fn arch_hints_parse() {
        let spec = parse_spec(
            "protocol p # trailing comment\nfield a 4 role=routing_key\narch scheduler=rr voq=auto\narch width_bits=256\n",
        )
        .unwrap();
        let hints = spec.arch_hints();
        assert_eq!(hints["scheduler"], ArchHint::Pinned("rr".into()));
        assert_eq!(hints["voq"], ArchHint::Auto);
        assert_eq!(hints["width_bits"], ArchHint::Pinned("256".into()));
        assert!(parse_spec("protocol p\nfield a 4 role=routing_key\narch color=red\n").is_err());
    }

    #[test]
    fn binding_validation() {
        let spec = parse_spec(BASIC).unwrap();
        let mut b = spec.binding();
        assert!(b.validate(&spec).is_ok());
        b.qos = Some("nope".into());
        assert_eq!(
            b.validate(&spec).unwrap_err(),
            ProtocolError::UnknownField("nope".into())
        );
    }
}
