from schemalyze.cli import main

main()
