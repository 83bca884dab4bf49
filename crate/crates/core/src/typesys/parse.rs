//! Textual type expressions.
//!
//! ```text
//! type    := "root" | "scalar" "(" tag ")" | "[" axis ("," axis)* "]"
//! axis    := tag (":" int)?
//! ```
//!
//! Port templates extend the grammar with parameter references:
//! `$name` for a tag or dim taken from a parameter, `#name` for the length
//! of a list parameter, `a+b`/`a-b` in dims, and `...$name` to splice a
//! list of tags as dynamic axes. A template dim that evaluates to 0 is
//! dynamic.

use super::{AxisType, NeuralType, TagHierarchy, TypeSysError};

/// Source of parameter values while expanding a port template.
pub trait TemplateEnv {
    fn string(&self, name: &str) -> Result<String, String>;
    fn int(&self, name: &str) -> Result<i64, String>;
    fn string_list(&self, name: &str) -> Result<Vec<String>, String>;
    fn list_len(&self, name: &str) -> Result<usize, String>;
}

/// Parse a type expression. Parameter references are rejected.
pub fn parse_type_expr(h: &TagHierarchy, text: &str) -> Result<NeuralType, TypeSysError> {
    Parser::new(text, None).parse(h)
}

/// Expand a port template against parameter values.
pub fn expand_template(
    h: &TagHierarchy,
    text: &str,
    env: &dyn TemplateEnv,
) -> Result<NeuralType, TypeSysError> {
    Parser::new(text, Some(env)).parse(h)
}

/// Inverse of [`parse_type_expr`].
pub fn render_type_expr(t: &NeuralType) -> String {
    t.to_string()
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    env: Option<&'a dyn TemplateEnv>,
}

enum TagRef {
    Name(String),
    Param(String),
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, env: Option<&'a dyn TemplateEnv>) -> Self {
        Parser { src, pos: 0, env }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, TypeSysError> {
        Err(TypeSysError::Syntax {
            pos: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), TypeSysError> {
        if self.eat(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    fn ident(&mut self) -> Result<String, TypeSysError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() => self.pos += 1,
            _ => return self.err("expected identifier"),
        }
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok(self.src[start..self.pos].to_string())
    }

    fn env(&self) -> Result<&'a dyn TemplateEnv, TypeSysError> {
        match self.env {
            Some(env) => Ok(env),
            None => self.err("parameter references are only allowed in port templates"),
        }
    }

    fn template_err<T>(&self, r: Result<T, String>) -> Result<T, TypeSysError> {
        r.map_err(TypeSysError::Template)
    }

    fn parse(mut self, h: &TagHierarchy) -> Result<NeuralType, TypeSysError> {
        if !h.is_frozen() {
            return Err(TypeSysError::NotFrozen);
        }
        let t = self.parse_type(h)?;
        self.skip_ws();
        if self.pos != self.src.len() {
            return self.err("trailing input");
        }
        Ok(t)
    }

    fn parse_type(&mut self, h: &TagHierarchy) -> Result<NeuralType, TypeSysError> {
        self.skip_ws();
        if self.eat("[") {
            let mut axes = Vec::new();
            loop {
                self.parse_axis(h, &mut axes)?;
                if self.eat(",") {
                    continue;
                }
                self.expect("]")?;
                break;
            }
            if axes.is_empty() {
                return Err(TypeSysError::EmptyTensor);
            }
            return Ok(NeuralType::Tensor(axes));
        }
        let word = self.ident()?;
        match word.as_str() {
            "root" => Ok(NeuralType::Root),
            "scalar" => {
                self.expect("(")?;
                let tag = self.tag_ref()?;
                let tag = self.resolve_tag(h, tag)?;
                self.expect(")")?;
                Ok(NeuralType::NonTensor(tag))
            }
            other => self.err(format!(
                "expected `root`, `scalar(..)` or `[`, found `{other}`"
            )),
        }
    }

    fn tag_ref(&mut self) -> Result<TagRef, TypeSysError> {
        if self.eat("$") {
            Ok(TagRef::Param(self.ident()?))
        } else {
            Ok(TagRef::Name(self.ident()?))
        }
    }

    fn resolve_tag(&self, h: &TagHierarchy, r: TagRef) -> Result<super::Tag, TypeSysError> {
        let name = match r {
            TagRef::Name(n) => n,
            TagRef::Param(p) => {
                let env = self.env()?;
                self.template_err(env.string(&p))?
            }
        };
        h.tag(&name)
    }

    fn parse_axis(
        &mut self,
        h: &TagHierarchy,
        axes: &mut Vec<AxisType>,
    ) -> Result<(), TypeSysError> {
        if self.eat("...") {
            self.expect("$")?;
            let name = self.ident()?;
            let env = self.env()?;
            for tag in self.template_err(env.string_list(&name))? {
                axes.push(AxisType::dynamic(h.tag(&tag)?));
            }
            return Ok(());
        }
        let tag = self.tag_ref()?;
        let tag = self.resolve_tag(h, tag)?;
        if !self.eat(":") {
            axes.push(AxisType::dynamic(tag));
            return Ok(());
        }
        let (value, templated) = self.dim_expr()?;
        let dim = match value {
            v if v < 0 => return Err(TypeSysError::InvalidDim(v)),
            0 if templated => None,
            0 => return Err(TypeSysError::InvalidDim(0)),
            v => Some(v as usize),
        };
        axes.push(AxisType { tag, dim });
        Ok(())
    }

    /// Returns the value and whether any parameter reference was involved.
    fn dim_expr(&mut self) -> Result<(i64, bool), TypeSysError> {
        let (mut acc, mut templated) = self.dim_term()?;
        loop {
            let sign = if self.eat("+") {
                1
            } else if self.eat("-") {
                -1
            } else {
                break;
            };
            let (v, t) = self.dim_term()?;
            acc += sign * v;
            templated |= t;
        }
        Ok((acc, templated))
    }

    fn dim_term(&mut self) -> Result<(i64, bool), TypeSysError> {
        self.skip_ws();
        if self.eat("$") {
            let name = self.ident()?;
            let env = self.env()?;
            return Ok((self.template_err(env.int(&name))?, true));
        }
        if self.eat("#") {
            let name = self.ident()?;
            let env = self.env()?;
            return Ok((self.template_err(env.list_len(&name))? as i64, true));
        }
        let negative = self.eat("-");
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected integer dimension");
        }
        let v: i64 = match self.src[start..self.pos].parse() {
            Ok(v) => v,
            Err(_) => return self.err("dimension out of range"),
        };
        Ok((if negative { -v } else { v }, false))
    }
}
