use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use super::state::EnvState;
use crate::ctl::{ToolError, ToolFault, ToolHost, Value};

pub type Args = BTreeMap<String, Value>;
pub type ReadFn = fn(&EnvState, &Args) -> Result<Value, ToolError>;
pub type WriteFn = fn(&mut EnvState, &Args) -> Result<Value, ToolError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamType {
    String,
    Integer,
    /// Int or Float.
    Number,
    Boolean,
    List,
    Map,
    Any,
}

impl ParamType {
    fn accepts(self, v: &Value) -> bool {
        matches!(
            (self, v),
            (ParamType::Any, _)
                | (ParamType::String, Value::Str(_))
                | (ParamType::Integer, Value::Int(_))
                | (ParamType::Number, Value::Int(_) | Value::Float(_))
                | (ParamType::Boolean, Value::Bool(_))
                | (ParamType::List, Value::List(_))
                | (ParamType::Map, Value::Map(_))
        )
    }

    fn python_name(self) -> &'static str {
        match self {
            ParamType::String => "str",
            ParamType::Integer => "int",
            ParamType::Number => "float",
            ParamType::Boolean => "bool",
            ParamType::List => "list",
            ParamType::Map => "dict",
            ParamType::Any => "any",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    #[serde(rename = "type")]
    pub ty: ParamType,
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolSpec {
    pub name: &'static str,
    pub params: Vec<ParamSpec>,
    pub doc: &'static str,
    pub mutates: bool,
    pub hidden_from_executor: bool,
}

/// Read tools get a shared borrow of the state, so they cannot mutate it.
#[derive(Clone, Copy)]
pub enum ToolImpl {
    Read(ReadFn),
    Write(WriteFn),
}

#[derive(Clone)]
pub struct Tool {
    pub spec: ToolSpec,
    imp: ToolImpl,
}

impl Tool {
    pub fn read(name: &'static str, doc: &'static str, f: ReadFn) -> Tool {
        Tool::with_impl(name, doc, ToolImpl::Read(f))
    }

    pub fn write(name: &'static str, doc: &'static str, f: WriteFn) -> Tool {
        Tool::with_impl(name, doc, ToolImpl::Write(f))
    }

    fn with_impl(name: &'static str, doc: &'static str, imp: ToolImpl) -> Tool {
        let spec = ToolSpec {
            name,
            params: Vec::new(),
            doc,
            mutates: matches!(imp, ToolImpl::Write(_)),
            hidden_from_executor: false,
        };
        Tool { spec, imp }
    }

    pub fn param(mut self, name: &'static str, ty: ParamType) -> Tool {
        self.spec.params.push(ParamSpec { name, ty, required: true });
        self
    }

    pub fn optional(mut self, name: &'static str, ty: ParamType) -> Tool {
        self.spec.params.push(ParamSpec { name, ty, required: false });
        self
    }

    pub fn hidden(mut self) -> Tool {
        self.spec.hidden_from_executor = true;
        self
    }

    fn check_args(&self, args: &Args) -> Result<(), ToolError> {
        for key in args.keys() {
            if !self.spec.params.iter().any(|p| p.name == key) {
                return Err(ToolError::invalid_argument(format!(
                    "{}() got an unexpected argument `{key}`",
                    self.spec.name
                )));
            }
        }
        for p in &self.spec.params {
            match args.get(p.name) {
                None if p.required => {
                    return Err(ToolError::invalid_argument(format!(
                        "{}() missing required argument `{}`",
                        self.spec.name, p.name
                    )))
                }
                Some(v) if !p.ty.accepts(v) => {
                    return Err(ToolError::type_mismatch(format!(
                        "{}() argument `{}` must be {}, got {}",
                        self.spec.name,
                        p.name,
                        p.ty.python_name(),
                        v.type_name()
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Python-style signature line used in tool documentation.
    pub fn signature(&self) -> String {
        let params: Vec<String> = self
            .spec
            .params
            .iter()
            .map(|p| {
                let opt = if p.required { "" } else { " = None" };
                format!("{}: {}{opt}", p.name, p.ty.python_name())
            })
            .collect();
        format!("{}({})", self.spec.name, params.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("duplicate tool name `{0}`")]
pub struct DuplicateTool(pub String);

/// Who is calling: executors cannot see hidden tools.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Executor,
    Full,
}

/// Immutable after construction; safe to share across threads.
#[derive(Clone, Default)]
pub struct ToolRegistry {
    tools: BTreeMap<&'static str, Tool>,
}

impl ToolRegistry {
    pub fn new(tools: Vec<Tool>) -> Result<ToolRegistry, DuplicateTool> {
        let mut map = BTreeMap::new();
        for tool in tools {
            let name = tool.spec.name;
            if map.insert(name, tool).is_some() {
                return Err(DuplicateTool(name.to_string()));
            }
        }
        Ok(ToolRegistry { tools: map })
    }

    pub fn get(&self, name: &str) -> Option<&Tool> {
        self.tools.get(name)
    }

    pub fn tools(&self) -> impl Iterator<Item = &Tool> {
        self.tools.values()
    }

    pub fn mutates(&self, name: &str) -> bool {
        self.get(name).is_some_and(|t| t.spec.mutates)
    }

    pub fn visible(&self, access: Access) -> impl Iterator<Item = &Tool> {
        self.tools.values().filter(move |t| access == Access::Full || !t.spec.hidden_from_executor)
    }

    pub fn call(&self, state: &mut EnvState, access: Access, name: &str, args: &Args) -> Result<Value, ToolFault> {
        let tool = match self.get(name) {
            Some(t) if access == Access::Full || !t.spec.hidden_from_executor => t,
            _ => return Err(ToolFault::Unknown),
        };
        tool.check_args(args).map_err(ToolFault::Failed)?;
        match tool.imp {
            ToolImpl::Read(f) => f(state, args),
            ToolImpl::Write(f) => f(state, args),
        }
        .map_err(ToolFault::Failed)
    }

    /// Documentation block listing every tool visible to `access`.
    pub fn describe(&self, access: Access) -> String {
        let mut out = String::new();
        for tool in self.visible(access) {
            let _ = writeln!(out, "- {}: {}", tool.signature(), tool.spec.doc);
        }
        out
    }

    pub fn schema(&self) -> Vec<&ToolSpec> {
        self.tools.values().map(|t| &t.spec).collect()
    }
}

/// Binds a registry to one state for the duration of an evaluation.
pub struct ToolContext<'a> {
    pub registry: &'a ToolRegistry,
    pub state: &'a mut EnvState,
    pub access: Access,
}

impl<'a> ToolContext<'a> {
    pub fn new(registry: &'a ToolRegistry, state: &'a mut EnvState, access: Access) -> Self {
        ToolContext { registry, state, access }
    }
}

impl ToolHost for ToolContext<'_> {
    fn call_tool(&mut self, name: &str, args: &Args) -> Result<Value, ToolFault> {
        self.registry.call(self.state, self.access, name, args)
    }
}

pub fn arg<'a>(args: &'a Args, name: &str) -> Result<&'a Value, ToolError> {
    args.get(name).ok_or_else(|| ToolError::invalid_argument(format!("missing argument `{name}`")))
}

pub fn arg_str<'a>(args: &'a Args, name: &str) -> Result<&'a str, ToolError> {
    arg(args, name)?.as_str().ok_or_else(|| ToolError::type_mismatch(format!("argument `{name}` must be a string")))
}

pub fn arg_int(args: &Args, name: &str) -> Result<i64, ToolError> {
    arg(args, name)?.as_int().ok_or_else(|| ToolError::type_mismatch(format!("argument `{name}` must be an integer")))
}

pub fn arg_f64(args: &Args, name: &str) -> Result<f64, ToolError> {
    arg(args, name)?.as_f64().ok_or_else(|| ToolError::type_mismatch(format!("argument `{name}` must be a number")))
}

pub fn arg_list<'a>(args: &'a Args, name: &str) -> Result<&'a [Value], ToolError> {
    arg(args, name)?.as_list().ok_or_else(|| ToolError::type_mismatch(format!("argument `{name}` must be a list")))
}

pub fn arg_str_list(args: &Args, name: &str) -> Result<Vec<String>, ToolError> {
    arg_list(args, name)?
        .iter()
        .map(|v| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| ToolError::type_mismatch(format!("argument `{name}` must be a list of strings")))
        })
        .collect()
}
