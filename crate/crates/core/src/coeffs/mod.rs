mod expr;
mod function;
mod problem;
mod quotients;

pub use expr::{parse_expression, Expr};
pub use function::{func, Antiderivative, Formula, FormulaSource, Func, Function, PieceSource};
pub use problem::{validate_problem, AssumptionCheck, CoefficientSet, ValidationReport};
pub use quotients::{difference_quotient_sup, dini_estimate, DiniValue, Kind, Side};
