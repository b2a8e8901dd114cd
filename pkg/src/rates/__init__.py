# Bath correlation functions and decay rates
